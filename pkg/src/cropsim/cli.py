"""Command-line interface: simulate, gen-data, calibrate, bench.

Every subcommand takes ``--config <path>`` plus repeated ``--set key=value``
dotted overrides (``ag.*``, ``crop.*``, ``site.*``). Exit codes: 0 success,
1 configuration/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import __version__
from .calibration import (CalibrationError, calibrate_cultivar,
                          load_phenology_dataset)
from .config import (ValidationError, bundled_agro_path, dump_run_config,
                     list_crops, list_sites, load_agro_config)
from .datagen import benchmark, generate_dataset, write_episode_csv, write_episode_jsonl
from .engine import (DEFAULT_MASK, EpisodeLog, FEATURE_NAMES, MINIMAL_MASK,
                     feature_values)
from .env import ActionSpec, RewardConfig, make_env
from .policies import POLICY_NAMES, builtin_policy

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

_MASK_PRESETS = {"default": DEFAULT_MASK, "minimal": MINIMAL_MASK,
                 "all": FEATURE_NAMES}


def _parse_kv(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"expected key=value, got {item!r}")
        out[key] = yaml.safe_load(raw)
    return out


def _resolve_config(path: str) -> Path:
    p = Path(path)
    return p if p.exists() else bundled_agro_path(path)


def _mask(arg: str) -> tuple[str, ...]:
    if arg in _MASK_PRESETS:
        return tuple(_MASK_PRESETS[arg])
    return tuple(name.strip() for name in arg.split(",") if name.strip())


def _action_spec(args) -> ActionSpec:
    return ActionSpec(f=args.fert_increment, n=args.fert_levels,
                      i=args.irrig_increment, m=args.irrig_levels)


def _reward(args) -> RewardConfig:
    params = _parse_kv(getattr(args, "reward_param", None))
    return RewardConfig(kind=args.reward, **params)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True,
                        help="agromanagement YAML (path or bundled name)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted override, e.g. crop.TSUM1=900 (repeatable)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override (defaults to the config's random_seed)")
    parser.add_argument("--fert-increment", type=float, default=10.0)
    parser.add_argument("--fert-levels", type=int, default=4)
    parser.add_argument("--irrig-increment", type=float, default=2.0)
    parser.add_argument("--irrig-levels", type=int, default=4)


def _cmd_simulate(args) -> int:
    bundle = load_agro_config(_resolve_config(args.config), args.set)
    if args.seed is not None:
        bundle = bundle.with_agro(random_seed=args.seed)
    spec = _action_spec(args)
    policy = builtin_policy(args.policy, spec, **_parse_kv(args.policy_param))
    reward_cfg = _reward(args)
    mask = _mask(args.mask)

    env = make_env(bundle, reward=reward_cfg, mask=mask, action_spec=spec,
                   seed=bundle.agro.random_seed)
    obs = env.reset(seed=bundle.agro.random_seed)
    rollout = []
    total_reward = 0.0
    step_index = 0
    terminated = truncated = False
    while not (terminated or truncated):
        view = env.sim.feature_view()
        features = dict(zip(FEATURE_NAMES, feature_values(view)))
        action = policy(env.sim.state.day_index, features)
        prev_obs = obs
        obs, reward, terminated, truncated, info = env.step(action)
        total_reward += reward
        rollout.append({
            "step": step_index,
            "action": int(action),
            "observation": [float(v) for v in prev_obs],
            "reward": float(reward),
            "terminated": bool(terminated),
            "truncated": bool(truncated),
            "info": info,
        })
        step_index += 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = EpisodeLog(records=env.episode_records, final_state=env.sim.state)
    write_episode_csv(log, out_dir / "episode.csv")
    write_episode_jsonl(log, out_dir / "episode.jsonl")
    with (out_dir / "rollout.jsonl").open("w") as fh:
        for row in rollout:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    dump_run_config(env.bundle, out_dir)
    print(f"episode: {len(log.records)} days, {step_index} decisions")
    print(f"final yield: {log.final_state.organs.storage:.2f} kg/ha")
    print(f"episode return ({reward_cfg.kind}): {total_reward:.3f}")
    print(f"outputs: {out_dir}")
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    bundle = load_agro_config(_resolve_config(args.config), args.set)
    if args.seed is not None:
        bundle = bundle.with_agro(random_seed=args.seed)
    manifest = generate_dataset(
        bundle, args.policy, args.episodes,
        seed=bundle.agro.random_seed if args.seed is None else args.seed,
        out_dir=args.out, fmt=args.format,
        policy_params=_parse_kv(args.policy_param),
        action_spec=_action_spec(args))
    print(f"wrote manifest: {manifest}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    dataset = load_phenology_dataset(args.dataset)
    bounds_doc = yaml.safe_load(Path(args.bounds).read_text())
    bounds = {name: (float(lo), float(hi)) for name, (lo, hi) in bounds_doc.items()}
    result = calibrate_cultivar(dataset, bounds, seed=args.seed, iters=args.iters)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "calibration.yaml").write_text(
        yaml.safe_dump(result.to_document(), sort_keys=True))
    with (out_dir / "trace.csv").open("w") as fh:
        fh.write("stage,evaluation,best_loss\n")
        for stage, trace in result.traces.items():
            for i, value in enumerate(trace):
                fh.write(f"{stage},{i},{value!r}\n")
    print(f"cultivar: {result.cultivar}")
    for stage, rmse in result.stage_rmse.items():
        print(f"  {stage:<9} RMSE {rmse:.2f} days")
    print(f"outputs: {out_dir}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    bundle = load_agro_config(_resolve_config(args.config), args.set)
    stats = benchmark(bundle, n_trials=args.trials, action_spec=_action_spec(args))
    print(stats.table())
    return EXIT_OK


def _cmd_list(args) -> int:
    print("crops:")
    for name, varieties in list_crops().items():
        print(f"  {name}: {', '.join(varieties)}")
    print("sites:")
    for name, variations in list_sites().items():
        print(f"  {name}: {', '.join(variations)}")
    print("policies:")
    print(f"  {', '.join(POLICY_NAMES)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cropsim",
        description="Deterministic crop-growth simulator with an RL environment layer.")
    parser.add_argument("--version", action="version", version=f"cropsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="roll a policy through one episode")
    _add_common(p)
    p.add_argument("--policy", default="no_op", choices=POLICY_NAMES)
    p.add_argument("--policy-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--reward", default="yield",
                   choices=("yield", "cost", "threshold", "runoff"))
    p.add_argument("--reward-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--mask", default="default",
                   help="preset (default|minimal|all) or comma-separated feature names")
    p.add_argument("--out", default="out/simulate")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("gen-data", help="generate an episode dataset")
    _add_common(p)
    p.add_argument("--policy", default="no_op", choices=POLICY_NAMES)
    p.add_argument("--policy-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--format", default="csv", choices=("csv", "jsonl"))
    p.add_argument("--out", default="out/dataset")
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("calibrate", help="calibrate grape phenology parameters")
    p.add_argument("--dataset", required=True, help="phenology observations CSV")
    p.add_argument("--bounds", required=True, help="YAML of parameter bounds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=500, help="BO steps per stage")
    p.add_argument("--out", default="out/calibration")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("bench", help="time episode, step, and reset")
    _add_common(p)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("list", help="list bundled crops, sites, and policies")
    p.set_defaults(fn=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, CalibrationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
