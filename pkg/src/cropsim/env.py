"""POMDP environment layer over the simulation engine.

Actions are a single discrete index covering three fertilizer channels
(N, P, K) with n levels each plus m irrigation levels, 3n + m indices in
total; level 0 of every channel is a no-op. Observations are a configurable
subset of the engine's feature registry. Reward wrappers cover plain yield,
cost-penalized yield, seasonal application thresholds, and runoff
penalties. Domain randomization can perturb parameters, swap crop/site
pairs, and resample weather years on reset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import engine as eg
from .config import RunBundle, ValidationError, load_crop, load_site
from .engine import DailyRecord, FEATURE_NAMES
from .soil import ActionAmounts


class Channel(enum.Enum):
    N = "N"
    P = "P"
    K = "K"
    WATER = "Water"


FERTILIZER_CHANNELS = (Channel.N, Channel.P, Channel.K)


@dataclass(frozen=True)
class ActionSpec:
    """Discretization: f kg/ha per fertilizer level (n levels per channel),
    i cm per irrigation level (m levels)."""

    f: float = 10.0
    n: int = 4
    i: float = 2.0
    m: int = 4

    def __post_init__(self) -> None:
        if self.f <= 0 or self.i <= 0:
            raise ValidationError("action increments f and i must be positive")
        if self.n < 1 or self.m < 1:
            raise ValidationError("level counts n and m must be >= 1")

    @property
    def count(self) -> int:
        return 3 * self.n + self.m


@dataclass(frozen=True)
class Action:
    channel: Channel
    amount: float  # kg/ha for fertilizer channels, cm for water

    def amounts(self) -> ActionAmounts:
        if self.channel is Channel.N:
            return ActionAmounts(n=self.amount)
        if self.channel is Channel.P:
            return ActionAmounts(p=self.amount)
        if self.channel is Channel.K:
            return ActionAmounts(k=self.amount)
        return ActionAmounts(water=self.amount)


def decode_action(spec: ActionSpec, index: int) -> Action:
    """Index -> (channel, amount); fertilizer channel c owns indices
    [c*n, (c+1)*n) at amounts level*f, irrigation owns [3n, 3n+m) at
    level*i."""
    if not 0 <= index < spec.count:
        raise IndexError(f"action index {index} outside [0, {spec.count})")
    if index < 3 * spec.n:
        channel = FERTILIZER_CHANNELS[index // spec.n]
        level = index % spec.n
        return Action(channel, level * spec.f)
    level = index - 3 * spec.n
    return Action(Channel.WATER, level * spec.i)


def encode_action(spec: ActionSpec, channel: Channel, level: int) -> int:
    """(channel, level) -> index; inverse of decode_action."""
    if channel is Channel.WATER:
        if not 0 <= level < spec.m:
            raise IndexError(f"irrigation level {level} outside [0, {spec.m})")
        return 3 * spec.n + level
    if not 0 <= level < spec.n:
        raise IndexError(f"fertilizer level {level} outside [0, {spec.n})")
    return FERTILIZER_CHANNELS.index(channel) * spec.n + level


@dataclass(frozen=True)
class RewardConfig:
    """Tagged reward variant.

    yield: per-step storage increment. cost: increment minus C times the
    applied fertilizer + irrigation. threshold: increment minus a penalty on
    each step whose action pushes cumulative totals beyond the limits. runoff:
    increment minus a penalty per runoff day.
    """

    kind: str = "yield"  # yield | cost | threshold | runoff
    c: float = 0.0
    fert_limit: float = 80.0  # kg/ha summed over N, P, K
    irrig_limit: float = 40.0  # cm
    penalty: float = 1e4

    def __post_init__(self) -> None:
        if self.kind not in ("yield", "cost", "threshold", "runoff"):
            raise ValidationError(f"unknown reward kind {self.kind!r}")
        if self.c < 0 or self.penalty < 0:
            raise ValidationError("reward constants must be >= 0")
        if self.fert_limit < 0 or self.irrig_limit < 0:
            raise ValidationError("reward limits must be >= 0")

    @classmethod
    def yield_only(cls) -> "RewardConfig":
        return cls(kind="yield")

    @classmethod
    def cost_penalized(cls, c: float) -> "RewardConfig":
        return cls(kind="cost", c=c)

    @classmethod
    def threshold(cls, fert_limit: float = 80.0, irrig_limit: float = 40.0,
                  penalty: float = 1e4) -> "RewardConfig":
        return cls(kind="threshold", fert_limit=fert_limit,
                   irrig_limit=irrig_limit, penalty=penalty)

    @classmethod
    def runoff_penalty(cls, penalty: float = 1e4) -> "RewardConfig":
        return cls(kind="runoff", penalty=penalty)


def violates_thresholds(cfg: RewardConfig, record: DailyRecord) -> bool:
    """True when this day's action pushed a cumulative total past a limit."""
    fert_applied = record.action.fertilizer_total()
    totals_fert = (record.feature("TOTN") + record.feature("TOTP")
                   + record.feature("TOTK"))
    if fert_applied > 0 and totals_fert > cfg.fert_limit:
        return True
    return record.action.water > 0 and record.feature("TOTIRRIG") > cfg.irrig_limit


def compute_reward(cfg: RewardConfig, record: DailyRecord) -> float:
    """Per-day reward; interval rewards are the sum over the interval's days."""
    reward = record.yield_delta
    if cfg.kind == "cost":
        reward -= cfg.c * (record.action.fertilizer_total() + record.action.water)
    elif cfg.kind == "threshold":
        if violates_thresholds(cfg, record):
            reward -= cfg.penalty
    elif cfg.kind == "runoff":
        if record.runoff:
            reward -= cfg.penalty
    return reward


#: Parameters perturbed by default when parameter noise is enabled.
DEFAULT_NOISE_PARAMS = (
    "crop.TSUM1", "crop.TSUM2", "crop.EPS", "crop.SLA",
    "site.field_capacity", "site.r_up",
)


@dataclass(frozen=True)
class RandomizationConfig:
    """Reset-time domain randomization; each part is independent.

    param_noise: multiplicative uniform noise of relative half-width delta
    on the named parameters. crop_site_pool: (crop_name, site_name) pairs
    sampled per reset. weather_years: candidate start years sampled per
    reset. A part set to None is disabled; an empty pool is an error.
    """

    param_noise: float = 0.0
    noise_params: tuple[str, ...] = DEFAULT_NOISE_PARAMS
    crop_site_pool: tuple[tuple[str, str], ...] | None = None
    weather_years: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.param_noise < 0:
            raise ValidationError("param_noise must be >= 0")
        if self.crop_site_pool is not None and len(self.crop_site_pool) == 0:
            raise ValidationError("crop_site_pool enabled but empty")
        if self.weather_years is not None and len(self.weather_years) == 0:
            raise ValidationError("weather_years enabled but empty")


NO_RANDOMIZATION = RandomizationConfig()


def validate_mask(mask) -> tuple[str, ...]:
    mask = tuple(mask)
    if not mask:
        raise ValidationError("observation mask must not be empty")
    unknown = [name for name in mask if name not in FEATURE_NAMES]
    if unknown:
        raise ValidationError(
            f"unknown feature names in mask: {unknown}; "
            f"known features: {list(FEATURE_NAMES)}"
        )
    if len(set(mask)) != len(mask):
        raise ValidationError("observation mask contains duplicates")
    return mask


def _randomized_bundle(bundle: RunBundle, rand: RandomizationConfig,
                       rng: np.random.Generator) -> RunBundle:
    # Sampling order is fixed: crop/site pair, weather year, parameter noise.
    if rand.crop_site_pool is not None:
        crop_name, site_name = rand.crop_site_pool[rng.integers(len(rand.crop_site_pool))]
        bundle = replace(bundle,
                         crop=load_crop(crop_name),
                         site=load_site(site_name),
                         agro=replace(bundle.agro, crop_name=crop_name,
                                      crop_variety="default",
                                      site_name=site_name,
                                      site_variation="default"))
    if rand.weather_years is not None:
        year = int(rand.weather_years[rng.integers(len(rand.weather_years))])
        bundle = replace(bundle, agro=replace(bundle.agro, year=year))
    if rand.param_noise > 0:
        crop, site = bundle.crop, bundle.site
        for name in rand.noise_params:
            scope, _, key = name.partition(".")
            factor = 1.0 + rng.uniform(-rand.param_noise, rand.param_noise)
            if scope == "crop":
                crop = crop.with_param(key, float(crop.param(key)) * factor)
            elif scope == "site":
                site = site.with_param(key, float(site.param(key)) * factor)
            else:
                raise ValidationError(f"noise parameter {name!r} must be crop.* or site.*")
        bundle = replace(bundle, crop=crop, site=site)
    bundle.validate()
    return bundle


class CropEnv:
    """Single-farm environment: seeded reset, discrete step, reward wrapper."""

    def __init__(self, bundle: RunBundle, reward: RewardConfig | None = None,
                 mask=eg.DEFAULT_MASK, action_spec: ActionSpec | None = None,
                 randomization: RandomizationConfig | None = None,
                 seed: int = 0):
        bundle.validate()
        self.base_bundle = bundle
        self.reward_config = reward or RewardConfig.yield_only()
        self.mask = validate_mask(mask)
        self.action_spec = action_spec or ActionSpec()
        self.randomization = randomization or NO_RANDOMIZATION
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self.bundle: RunBundle = bundle  # post-randomization, set on reset
        self.sim: eg.Simulation | None = None
        self.episode_records: list[DailyRecord] = []

    # -- identity ---------------------------------------------------------
    @property
    def env_id(self) -> str:
        kind = "perennial" if self.base_bundle.crop.perennial else "annual"
        return f"{kind}-{self.base_bundle.agro.limitation_mode}-single"

    @property
    def n_farms(self) -> int:
        return 1

    @property
    def action_count(self) -> int:
        return self.action_spec.count

    @property
    def observation_length(self) -> int:
        return len(self.mask)

    # -- protocol ---------------------------------------------------------
    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._seed = seed
            self._rng = np.random.default_rng(seed)
        self.bundle = _randomized_bundle(self.base_bundle, self.randomization,
                                         self._rng)
        self.sim = eg.init_simulation(self.bundle, seed=self._seed)
        self.episode_records = []
        return self._observe()

    def _observe(self) -> np.ndarray:
        view = self.sim.feature_view()
        return np.asarray(eg.masked_observation(view, self.mask), dtype=float)

    def step(self, action_index: int):
        if self.sim is None:
            raise SimulationNotReset("call reset() before step()")
        if self.sim.state.terminated:
            raise eg.SimulationTerminated("episode finished; call reset()")
        amounts = decode_action(self.action_spec, int(action_index)).amounts()
        interval = self.bundle.agro.step_interval_days
        records: list[DailyRecord] = []
        for offset in range(interval):
            if self.sim.state.terminated:
                break
            records.append(eg.step_day(
                self.sim, amounts if offset == 0 else ActionAmounts()))
        self.episode_records.extend(records)
        reward = sum(compute_reward(self.reward_config, r) for r in records)
        violations = sum(violates_thresholds(self.reward_config, r) for r in records) \
            if self.reward_config.kind == "threshold" else 0
        state = self.sim.state
        terminated = state.terminated and state.termination_reason == "maturity"
        truncated = state.terminated and state.termination_reason == "horizon"
        info = {
            "date": state.date.isoformat(),
            "day_index": state.day_index,
            "runoff": bool(any(r.runoff for r in records)),
            "runoff_days_interval": int(sum(r.runoff for r in records)),
            "yield": eg.yield_of(state),
            "totals": {"n": state.totals.n, "p": state.totals.p,
                       "k": state.totals.k, "irrig": state.totals.irrig},
            "violations": int(violations),
            "farm_rewards": [reward],
            "farm_yields": [eg.yield_of(state)],
        }
        return self._observe(), reward, terminated, truncated, info


class SimulationNotReset(RuntimeError):
    pass


class MultiFarmEnv:
    """Several farms under shared weather; one action applied to every farm.

    The observation concatenates each farm's masked features; the scalar
    reward is the sum of per-farm rewards, which are also reported in info.
    """

    def __init__(self, bundles, reward: RewardConfig | None = None,
                 mask=eg.DEFAULT_MASK, action_spec: ActionSpec | None = None,
                 randomization: RandomizationConfig | None = None,
                 seed: int = 0):
        bundles = list(bundles)
        if not bundles:
            raise ValidationError("multi-farm env needs at least one farm")
        first = bundles[0].agro
        for b in bundles[1:]:
            if (b.agro.year, b.agro.sow_date, b.agro.step_interval_days,
                    b.agro.max_duration_days, b.agro.n_seasons) != \
               (first.year, first.sow_date, first.step_interval_days,
                    first.max_duration_days, first.n_seasons):
                raise ValidationError("farms must share the simulation calendar")
        self.farms = [CropEnv(b, reward=reward, mask=mask, action_spec=action_spec,
                              randomization=randomization, seed=seed)
                      for b in bundles]
        self.mask = self.farms[0].mask
        self.action_spec = self.farms[0].action_spec
        self.reward_config = self.farms[0].reward_config
        self._seed = seed

    @property
    def env_id(self) -> str:
        kind = "perennial" if self.farms[0].base_bundle.crop.perennial else "annual"
        return f"{kind}-{self.farms[0].base_bundle.agro.limitation_mode}-multi"

    @property
    def n_farms(self) -> int:
        return len(self.farms)

    @property
    def action_count(self) -> int:
        return self.action_spec.count

    @property
    def observation_length(self) -> int:
        return len(self.mask) * len(self.farms)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._seed = seed
            self._meta_rng = np.random.default_rng(seed)
        elif not hasattr(self, "_meta_rng"):
            self._meta_rng = np.random.default_rng(self._seed)
        base = int(self._meta_rng.integers(2**62))
        obs = [farm.reset(seed=base) for farm in self.farms]
        shared = self.farms[0].sim.weather
        for farm in self.farms[1:]:  # same weather realization on every farm
            farm.sim = eg.init_simulation(farm.bundle, seed=base, weather=shared)
        return np.concatenate([farm._observe() for farm in self.farms]) \
            if len(self.farms) > 1 else obs[0]

    def step(self, action_index: int):
        results = [farm.step(action_index) for farm in self.farms]
        obs = np.concatenate([r[0] for r in results])
        rewards = [r[1] for r in results]
        # The joint episode ends as soon as any farm ends.
        terminated = any(r[2] for r in results)
        truncated = any(r[3] for r in results) and not terminated
        info = {
            "farm_rewards": rewards,
            "farm_yields": [r[4]["yield"] for r in results],
            "runoff": bool(any(r[4]["runoff"] for r in results)),
            "farm_infos": [r[4] for r in results],
        }
        return obs, float(sum(rewards)), terminated, truncated, info


def make_env(bundle: RunBundle, reward: RewardConfig | None = None,
             mask=eg.DEFAULT_MASK, action_spec: ActionSpec | None = None,
             randomization: RandomizationConfig | None = None,
             seed: int = 0) -> CropEnv:
    return CropEnv(bundle, reward=reward, mask=mask, action_spec=action_spec,
                   randomization=randomization, seed=seed)


def make_multi_farm_env(bundles, reward: RewardConfig | None = None,
                        mask=eg.DEFAULT_MASK, action_spec: ActionSpec | None = None,
                        randomization: RandomizationConfig | None = None,
                        seed: int = 0) -> MultiFarmEnv:
    return MultiFarmEnv(bundles, reward=reward, mask=mask,
                        action_spec=action_spec, randomization=randomization,
                        seed=seed)
