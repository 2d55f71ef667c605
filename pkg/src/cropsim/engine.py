"""Daily simulation engine: fixed step order, feature registry, episode runs.

The step order is fixed: weather lookup, action application, phenology,
stress factors, assimilation and respiration, partitioning (with the
surface-excess rule), death rates, the nutrient-layer transfer with uptake
equal to the nutrient demand of new growth, the water balance, and finally
totals and the daily record. Annual runs terminate at maturity (dvs = 2);
perennials run to the configured horizon across seasons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import date as Date, timedelta

from . import canopy as cn
from . import phenology as ph
from . import soil as sl
from .config import RunBundle
from .soil import ActionAmounts, NutrientTriple, SoilState, ZERO_ACTION
from .weather import WeatherDay, WeatherSeries, day_length


class SimulationError(RuntimeError):
    pass


class SimulationTerminated(SimulationError):
    """step_day called on a finished simulation."""


@dataclass(frozen=True, slots=True)
class Totals:
    n: float = 0.0
    p: float = 0.0
    k: float = 0.0
    irrig: float = 0.0

    def plus(self, amounts: ActionAmounts) -> "Totals":
        return Totals(self.n + amounts.n, self.p + amounts.p,
                      self.k + amounts.k, self.irrig + amounts.water)

    def fertilizer_total(self) -> float:
        return self.n + self.p + self.k


@dataclass(frozen=True, slots=True)
class SimState:
    day_index: int
    date: Date
    phenology: ph.PhenologyState
    organs: cn.OrganPools
    soil: SoilState
    totals: Totals
    age: float  # years, increments at each dormancy release
    terminated: bool = False
    termination_reason: str = ""  # "maturity" | "horizon"


@dataclass(frozen=True, slots=True)
class FeatureView:
    """Everything feature accessors may read for one day."""

    state: SimState
    weather: WeatherDay
    day_len: float
    lai: float


def _registry() -> dict[str, callable]:
    s = lambda fn: lambda v: fn(v.state)  # noqa: E731
    w = lambda fn: lambda v: fn(v.weather)  # noqa: E731
    return {
        "DAY": s(lambda st: float(st.day_index)),
        "DOY": lambda v: float(v.weather.date.timetuple().tm_yday),
        "DVS": s(lambda st: st.phenology.dvs),
        "TSUM": s(lambda st: st.phenology.tsum),
        "CHILL": s(lambda st: st.phenology.chill),
        "DORMANT": s(lambda st: 1.0 if st.phenology.dormant else 0.0),
        "DORMANCY_DAYS": s(lambda st: float(st.phenology.dormancy_days)),
        "AGE": s(lambda st: float(st.age)),
        "WRT": s(lambda st: st.organs.roots),
        "WST": s(lambda st: st.organs.stems),
        "WLV": s(lambda st: st.organs.leaves),
        "WSO": s(lambda st: st.organs.storage),
        "TAGP": s(lambda st: st.organs.stems + st.organs.leaves + st.organs.storage),
        "LAI": lambda v: v.lai,
        "SM": s(lambda st: st.soil.sm),
        "NAVAIL_SURFACE": s(lambda st: st.soil.surface_n),
        "PAVAIL_SURFACE": s(lambda st: st.soil.surface_p),
        "KAVAIL_SURFACE": s(lambda st: st.soil.surface_k),
        "NAVAIL_SUB": s(lambda st: st.soil.subsoil_n),
        "PAVAIL_SUB": s(lambda st: st.soil.subsoil_p),
        "KAVAIL_SUB": s(lambda st: st.soil.subsoil_k),
        "NUPTAKE": s(lambda st: st.soil.uptaken_n),
        "PUPTAKE": s(lambda st: st.soil.uptaken_p),
        "KUPTAKE": s(lambda st: st.soil.uptaken_k),
        "RUNOFF": s(lambda st: 1.0 if st.soil.runoff_today else 0.0),
        "RUNOFF_DAYS": s(lambda st: float(st.soil.runoff_days)),
        "TOTN": s(lambda st: st.totals.n),
        "TOTP": s(lambda st: st.totals.p),
        "TOTK": s(lambda st: st.totals.k),
        "TOTIRRIG": s(lambda st: st.totals.irrig),
        "TMIN": w(lambda d: d.t_min),
        "TMAX": w(lambda d: d.t_max),
        "TEMP": w(lambda d: d.t_avg),
        "IRRAD": w(lambda d: d.irradiation),
        "RAIN": w(lambda d: d.rainfall),
        "WIND": w(lambda d: d.wind),
        "VAP": w(lambda d: d.vapor_pressure),
        "DAYL": lambda v: v.day_len,
    }


_ACCESSORS = _registry()

#: Ordered names of every scalar the registry exposes.
FEATURE_NAMES: tuple[str, ...] = tuple(_ACCESSORS)

#: Default observation set: development, yield, applied totals, moisture,
#: subsoil nutrients, irradiation, temperature, rainfall.
DEFAULT_MASK: tuple[str, ...] = (
    "DVS", "WSO", "TOTN", "TOTP", "TOTK", "TOTIRRIG", "SM",
    "NAVAIL_SUB", "PAVAIL_SUB", "KAVAIL_SUB", "IRRAD", "TEMP", "RAIN",
)

#: Compact 7-feature observation set.
MINIMAL_MASK: tuple[str, ...] = ("WSO", "DVS", "LAI", "SM", "RAIN", "IRRAD", "TEMP")

_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


@dataclass(frozen=True)
class DailyRecord:
    date: Date
    action: ActionAmounts
    yield_delta: float
    runoff: bool
    features: tuple[float, ...]  # aligned with FEATURE_NAMES

    def feature(self, name: str) -> float:
        return self.features[_FEATURE_INDEX[name]]

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.features))


@dataclass
class EpisodeLog:
    records: list[DailyRecord]
    final_state: SimState

    def __len__(self) -> int:
        return len(self.records)


class Simulation:
    """One crop/site/weather run; exclusively owned by its caller."""

    def __init__(self, bundle: RunBundle, weather: WeatherSeries | None = None,
                 seed: int | None = None):
        bundle.validate()
        self.bundle = bundle
        self.weather = weather if weather is not None else bundle.weather()
        self.seed = bundle.agro.random_seed if seed is None else seed
        self.horizon = bundle.agro.horizon_days()
        start = bundle.agro.start_date()
        if self.weather.start > start or \
                self.weather.end < start + timedelta(days=self.horizon - 1):
            raise SimulationError("weather series does not cover the run horizon")
        crop, site = bundle.crop, bundle.site
        self.state = SimState(
            day_index=0,
            date=start,
            phenology=ph.initial_state(crop.phenology),
            organs=cn.OrganPools(crop.init_roots, crop.init_stems,
                                 crop.init_leaves, crop.init_storage),
            soil=SoilState(
                sm=site.init_sm,
                surface_n=site.init_surface_n, surface_p=site.init_surface_p,
                surface_k=site.init_surface_k,
                subsoil_n=site.init_subsoil_n, subsoil_p=site.init_subsoil_p,
                subsoil_k=site.init_subsoil_k,
            ),
            totals=Totals(),
            age=0.0,
        )

    def current_weather(self) -> WeatherDay:
        return self.weather.day_at(self.state.date)

    def feature_view(self) -> FeatureView:
        day = self.current_weather()
        return _make_view(self.state, day,
                          day_length(self.weather.latitude,
                                     day.date.timetuple().tm_yday),
                          self.bundle.crop.canopy)


def _make_view(state: SimState, day: WeatherDay, day_len: float,
               canopy_params: cn.CanopyParams) -> FeatureView:
    return FeatureView(state, day, day_len,
                       lai=cn.lai_of(state.organs, canopy_params))


def feature_values(view: FeatureView) -> tuple[float, ...]:
    return tuple(acc(view) for acc in _ACCESSORS.values())


def masked_observation(view: FeatureView, mask: tuple[str, ...]) -> list[float]:
    return [_ACCESSORS[name](view) for name in mask]


def init_simulation(bundle: RunBundle, seed: int | None = None,
                    weather: WeatherSeries | None = None) -> Simulation:
    """Deterministic per (bundle, seed): all state comes from the files."""
    return Simulation(bundle, weather=weather, seed=seed)


def nutrient_demand(crop, net_growth: float) -> NutrientTriple:
    g = max(net_growth, 0.0)
    return NutrientTriple(crop.demand_n * g, crop.demand_p * g, crop.demand_k * g)


def step_day(sim: Simulation, amounts: ActionAmounts = ZERO_ACTION) -> DailyRecord:
    """Advance one day and return its record."""
    state = sim.state
    if state.terminated:
        raise SimulationTerminated(f"simulation already terminated ({state.termination_reason})")
    amounts.validate()
    crop, site = sim.bundle.crop, sim.bundle.site.params
    w = sim.weather.day_at(state.date)
    day_len = day_length(sim.weather.latitude, w.date.timetuple().tm_yday)

    soil = sl.apply_action(state.soil, amounts, site)

    phen = ph.step_phenology(state.phenology, crop.phenology, w, day_len)
    released = state.phenology.dormant and not phen.dormant
    age = state.age + (1.0 if released else 0.0)
    organs = state.organs
    if released:
        organs = replace(organs, leaves=max(organs.leaves, crop.regrow_leaves),
                         storage=0.0)

    lai = cn.lai_of(organs, crop.canopy)
    respiration = cn.maintenance_respiration(organs, w.t_avg, age, crop.canopy)
    potential_net = cn.daily_assimilation(lai, w.irradiation, 1.0, age,
                                          crop.canopy) - respiration
    factors = sl.stress_factors(soil, nutrient_demand(crop, potential_net), site)
    stress = sl.overall_stress(factors, sim.bundle.agro.limitation_mode)

    gross = cn.daily_assimilation(lai, w.irradiation, stress, age, crop.canopy)
    net = gross - respiration
    surface_excess = soil.surface_total() > site.runoff_surface_threshold
    increments = cn.partition_growth(organs, net, phen.dvs, surface_excess,
                                     crop.canopy)
    organs = cn.apply_growth(organs, increments)
    organs = cn.apply_death_rates(organs, phen.dvs, crop.perennial,
                                  phen.dormant, crop.canopy)

    water_in = w.rainfall + amounts.water
    soil, _uptake, runoff = sl.step_nutrient_layers(
        soil, nutrient_demand(crop, net), water_in, site)
    # Stomatal closure: transpiration scales with the water-stress factor.
    transp = crop.transp_max * (1.0 - math.exp(-crop.canopy.k_ext * lai)) \
        * factors.water
    soil = sl.step_soil_water(soil, w, transp, site)

    totals = state.totals.plus(amounts)
    day_index = state.day_index + 1
    terminated, reason = False, ""
    if not crop.perennial and phen.dvs >= 2.0:
        terminated, reason = True, "maturity"
    elif day_index >= sim.horizon:
        terminated, reason = True, "horizon"

    new_state = SimState(
        day_index=day_index,
        date=state.date + timedelta(days=1),
        phenology=phen,
        organs=organs,
        soil=soil,
        totals=totals,
        age=age,
        terminated=terminated,
        termination_reason=reason,
    )
    sim.state = new_state
    view = _make_view(new_state, w, day_len, crop.canopy)
    return DailyRecord(
        date=w.date,
        action=amounts,
        yield_delta=organs.storage - state.organs.storage,
        runoff=runoff,
        features=feature_values(view),
    )


def yield_of(sim_or_state) -> float:
    """Current yield: the storage-organ pool, kg/ha."""
    state = sim_or_state.state if isinstance(sim_or_state, Simulation) else sim_or_state
    return state.organs.storage


def run_episode(bundle: RunBundle, policy, action_spec=None,
                seed: int | None = None,
                weather: WeatherSeries | None = None) -> EpisodeLog:
    """Roll a policy to termination.

    ``policy(day_index, features)`` returns an action index decoded with
    ``action_spec`` (defaults to the policy's bound spec). The action
    applies on the first day of each decision interval; the remaining
    interval days take zero action.
    """
    from .env import ActionSpec, decode_action  # local import, no cycle at module load

    sim = init_simulation(bundle, seed=seed, weather=weather)
    if action_spec is None:
        action_spec = getattr(policy, "action_spec", None) or ActionSpec()
    interval = bundle.agro.step_interval_days
    records: list[DailyRecord] = []
    while not sim.state.terminated:
        view = sim.feature_view()
        index = policy(sim.state.day_index, dict(zip(FEATURE_NAMES, feature_values(view))))
        amounts = decode_action(action_spec, index).amounts()
        for offset in range(interval):
            if sim.state.terminated:
                break
            records.append(step_day(sim, amounts if offset == 0 else ZERO_ACTION))
    return EpisodeLog(records=records, final_state=sim.state)
