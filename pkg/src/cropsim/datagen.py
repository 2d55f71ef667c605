"""Episode-log serialization, the dataset generation pipeline, and the
runtime benchmark harness.

Logs serialize to CSV and JSON-lines with one record per simulated day in
registry column order; both encodings carry the identical record stream.
Dataset jobs write per-episode logs, one resolved config snapshot, and a
manifest with per-episode seeds and content hashes, and are byte-identical
when re-run with the same seed.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .config import RunBundle, dump_run_config
from .engine import (DailyRecord, EpisodeLog, FEATURE_NAMES, init_simulation,
                     run_episode, step_day)
from .env import ActionSpec
from .policies import Policy, builtin_policy
from .soil import ActionAmounts

_BASE_COLUMNS = ("date", "action_n", "action_p", "action_k", "action_water",
                 "yield_delta", "runoff")


def episode_columns() -> tuple[str, ...]:
    return _BASE_COLUMNS + FEATURE_NAMES


def _record_row(rec: DailyRecord) -> list:
    return [rec.date.isoformat(), rec.action.n, rec.action.p, rec.action.k,
            rec.action.water, rec.yield_delta, int(rec.runoff),
            *rec.features]


def write_episode_csv(log: EpisodeLog, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(episode_columns()) + "\n")
        for rec in log.records:
            fh.write(",".join(_format(v) for v in _record_row(rec)) + "\n")
    return path


def _format(value) -> str:
    return value if isinstance(value, str) else repr(value)


def write_episode_jsonl(log: EpisodeLog, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for rec in log.records:
            row = dict(zip(episode_columns(), _record_row(rec)))
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def read_episode_rows(path: str | Path) -> list[dict]:
    """Parse either encoding back into per-day dicts of floats (dates as str)."""
    path = Path(path)
    rows: list[dict] = []
    if path.suffix == ".jsonl":
        for line in path.read_text().splitlines():
            rows.append(json.loads(line))
    else:
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            values = line.split(",")
            row = {}
            for key, raw in zip(header, values):
                row[key] = raw if key == "date" else json.loads(raw)
            rows.append(row)
    return rows


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _episode_policy(name: str, params: dict, action_spec: ActionSpec,
                    episode_seed: int) -> Policy:
    if name == "random":  # per-episode reseeding keeps episodes distinct
        params = {**params, "seed": params.get("seed", 0) + episode_seed}
    return builtin_policy(name, action_spec, **params)


def generate_dataset(bundle: RunBundle, policy_name: str, n_episodes: int,
                     seed: int, out_dir: str | Path, fmt: str = "csv",
                     policy_params: dict | None = None,
                     action_spec: ActionSpec | None = None) -> Path:
    """Write n_episodes rollout logs plus a config snapshot and manifest.

    Returns the manifest path. Deterministic per seed: re-running yields
    byte-identical files.
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be csv or jsonl, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = action_spec or ActionSpec()
    params = dict(policy_params or {})
    snapshot = dump_run_config(bundle, out_dir)
    episodes = []
    ss = np.random.SeedSequence(seed)
    episode_seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(max(n_episodes, 1))]
    writer = write_episode_csv if fmt == "csv" else write_episode_jsonl
    for index in range(n_episodes):
        ep_seed = episode_seeds[index]
        policy = _episode_policy(policy_name, params, spec, ep_seed)
        log = run_episode(bundle, policy, action_spec=spec, seed=ep_seed)
        path = out_dir / f"episode_{index:04d}.{fmt}"
        writer(log, path)
        episodes.append({
            "index": index,
            "seed": ep_seed,
            "file": path.name,
            "sha256": _sha256(path),
            "steps": len(log),
            "final_yield": log.final_state.organs.storage,
        })
    manifest = {
        "seed": seed,
        "policy": {"name": policy_name, "params": params},
        "action_spec": {"f": spec.f, "n": spec.n, "i": spec.i, "m": spec.m},
        "format": fmt,
        "config_snapshot": {"file": snapshot.name, "sha256": _sha256(snapshot)},
        "episodes": episodes,
    }
    manifest_path = out_dir / "manifest.yaml"
    manifest_path.write_text(yaml.safe_dump(manifest, sort_keys=True))
    return manifest_path


@dataclass(frozen=True)
class TimingStats:
    episode_mean: float
    episode_std: float
    step_mean: float
    step_std: float
    reset_mean: float
    reset_std: float
    trials: int
    episode_steps: int

    def table(self) -> str:
        rows = [("1 Episode", self.episode_mean, self.episode_std),
                ("Step Function", self.step_mean, self.step_std),
                ("Reset Function", self.reset_mean, self.reset_std)]
        lines = [f"Run Time (s) over {self.trials} trials "
                 f"({self.episode_steps}-step episode)"]
        for name, mean, std in rows:
            lines.append(f"  {name:<16} {mean:.6f} ± {std:.6f}")
        return "\n".join(lines)


def _timed(fn, trials: int) -> tuple[float, float]:
    samples = []
    for _ in range(trials):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return (statistics.fmean(samples),
            statistics.stdev(samples) if trials > 1 else 0.0)


def benchmark(bundle: RunBundle, n_trials: int = 100,
              action_spec: ActionSpec | None = None) -> TimingStats:
    """Wall-time means and deviations of a full episode, one engine step,
    and simulation initialization."""
    spec = action_spec or ActionSpec()
    policy = builtin_policy("biweekly_NW", spec)
    weather = bundle.weather()  # shared, excluded from the timings below

    episode_steps = len(run_episode(bundle, policy, action_spec=spec, weather=weather))
    episode_mean, episode_std = _timed(
        lambda: run_episode(bundle, policy, action_spec=spec, weather=weather),
        n_trials)

    sim = init_simulation(bundle, weather=weather)
    for _ in range(5):  # steady mid-episode state for the step timing
        step_day(sim)
    amounts = ActionAmounts(n=10.0)

    def one_step():
        if sim.state.terminated:
            reset_sim()
        step_day(sim, amounts)

    def reset_sim():
        nonlocal sim
        sim = init_simulation(bundle, weather=weather)

    step_mean, step_std = _timed(one_step, n_trials)
    reset_mean, reset_std = _timed(reset_sim, n_trials)
    return TimingStats(episode_mean=episode_mean, episode_std=episode_std,
                       step_mean=step_mean, step_std=step_std,
                       reset_mean=reset_mean, reset_std=reset_std,
                       trials=n_trials, episode_steps=episode_steps)
