"""Bucket water balance and a three-compartment NPK balance.

Fertilizer lands on the soil surface, is absorbed into the subsoil (faster
on wet days), and is taken up by roots from the subsoil. Runoff fires when
surface accumulation coincides with enough rain or irrigation and removes a
fixed fraction of every surface pool. Per-element mass is conserved across
surface + subsoil + plant uptake + runoff losses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .weather import WeatherDay

#: Limitation mode -> stress channels that actively limit growth.
LIMITATION_MODES: dict[str, tuple[str, ...]] = {
    "potential": (),
    "w": ("water",),
    "n": ("n",),
    "np": ("n", "p"),
    "npk": ("n", "p", "k"),
    "lnpkw": ("water", "n", "p", "k"),
}


@dataclass(frozen=True, slots=True)
class ActionAmounts:
    """Per-day management input: fertilizer in kg/ha, water in cm."""

    n: float = 0.0
    p: float = 0.0
    k: float = 0.0
    water: float = 0.0

    def validate(self) -> None:
        if self.n < 0 or self.p < 0 or self.k < 0 or self.water < 0:
            raise ValueError(f"action amounts must be >= 0, got {self}")

    def fertilizer_total(self) -> float:
        return self.n + self.p + self.k


ZERO_ACTION = ActionAmounts()


@dataclass(frozen=True, slots=True)
class NutrientTriple:
    n: float = 0.0
    p: float = 0.0
    k: float = 0.0


@dataclass(frozen=True)
class SiteParams:
    porosity: float
    field_capacity: float
    wilting_point: float
    sm_crit: float  # moisture fraction below which water stress starts
    root_depth: float  # cm
    r_abs: float  # 1/day surface -> subsoil absorption
    r_abs_wet: float  # 1/day absorption when water arrived that day
    r_up: float  # 1/day cap on subsoil -> plant uptake
    runoff_surface_threshold: float  # kg/ha summed over N, P, K
    runoff_water_threshold: float  # cm/day
    runoff_loss_frac: float
    perc_rate: float  # 1/day drainage of moisture above field capacity
    evap_base: float  # cm/day bare evaporation

    def validate(self) -> None:
        if not (0.0 <= self.wilting_point < self.sm_crit < self.field_capacity
                < self.porosity <= 1.0):
            raise ValueError(
                "need 0 <= wilting_point < sm_crit < field_capacity < porosity <= 1, got "
                f"({self.wilting_point}, {self.sm_crit}, {self.field_capacity}, {self.porosity})"
            )
        for name in ("r_abs", "r_abs_wet", "r_up", "runoff_loss_frac", "perc_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"site rate {name} must be in [0,1], got {v}")
        if self.root_depth <= 0:
            raise ValueError("root_depth must be positive")
        if self.runoff_surface_threshold < 0 or self.runoff_water_threshold < 0:
            raise ValueError("runoff thresholds must be >= 0")
        if self.evap_base < 0:
            raise ValueError("evap_base must be >= 0")


@dataclass(frozen=True, slots=True)
class SoilState:
    sm: float  # volumetric moisture fraction
    surface_n: float = 0.0
    surface_p: float = 0.0
    surface_k: float = 0.0
    subsoil_n: float = 0.0
    subsoil_p: float = 0.0
    subsoil_k: float = 0.0
    uptaken_n: float = 0.0
    uptaken_p: float = 0.0
    uptaken_k: float = 0.0
    lost_n: float = 0.0  # cumulative runoff losses, conservation bookkeeping
    lost_p: float = 0.0
    lost_k: float = 0.0
    runoff_today: bool = False
    runoff_days: int = 0

    def surface_total(self) -> float:
        return self.surface_n + self.surface_p + self.surface_k


@dataclass(frozen=True, slots=True)
class StressFactors:
    water: float
    n: float
    p: float
    k: float


def apply_action(soil: SoilState, amounts: ActionAmounts,
                 site: SiteParams) -> SoilState:
    """Add fertilizer to the surface pools and irrigation water to moisture.

    Moisture is clamped at porosity; the full irrigation depth still counts
    toward the day's runoff-water check regardless of clamping.
    """
    amounts.validate()
    sm = min(soil.sm + amounts.water / site.root_depth, site.porosity)
    return replace(soil,
                   sm=sm,
                   surface_n=soil.surface_n + amounts.n,
                   surface_p=soil.surface_p + amounts.p,
                   surface_k=soil.surface_k + amounts.k)


def step_soil_water(soil: SoilState, day: WeatherDay, transp_demand: float,
                    site: SiteParams) -> SoilState:
    """Daily bucket update: rain in, evaporation and transpiration out,
    drainage of moisture above field capacity, floored at zero."""
    sm = soil.sm + (day.rainfall - site.evap_base - transp_demand) / site.root_depth
    sm = min(sm, site.porosity)
    if sm > site.field_capacity:
        sm = site.field_capacity + (sm - site.field_capacity) * (1.0 - site.perc_rate)
    return replace(soil, sm=max(sm, 0.0))


def step_nutrient_layers(soil: SoilState, demand: NutrientTriple, water_in: float,
                         site: SiteParams) -> tuple[SoilState, NutrientTriple, bool]:
    """Runoff check, surface -> subsoil absorption, subsoil -> plant uptake.

    Runoff fires when the summed surface pools exceed the surface threshold
    AND the day's incoming water exceeds the water threshold; it removes
    runoff_loss_frac of each surface pool before any absorption. Uptake per
    element is min(demand, r_up * subsoil).
    """
    runoff = (soil.surface_total() > site.runoff_surface_threshold
              and water_in > site.runoff_water_threshold)
    surface = [soil.surface_n, soil.surface_p, soil.surface_k]
    lost = [soil.lost_n, soil.lost_p, soil.lost_k]
    if runoff:
        for i in range(3):
            shed = surface[i] * site.runoff_loss_frac
            surface[i] -= shed
            lost[i] += shed
    r = site.r_abs_wet if water_in > 0.0 else site.r_abs
    subsoil = [soil.subsoil_n, soil.subsoil_p, soil.subsoil_k]
    for i in range(3):
        moved = r * surface[i]
        surface[i] -= moved
        subsoil[i] += moved
    demands = (demand.n, demand.p, demand.k)
    uptaken = [soil.uptaken_n, soil.uptaken_p, soil.uptaken_k]
    taken = [0.0, 0.0, 0.0]
    for i in range(3):
        taken[i] = min(demands[i], site.r_up * subsoil[i])
        subsoil[i] -= taken[i]
        uptaken[i] += taken[i]
    out = replace(soil,
                  surface_n=surface[0], surface_p=surface[1], surface_k=surface[2],
                  subsoil_n=subsoil[0], subsoil_p=subsoil[1], subsoil_k=subsoil[2],
                  uptaken_n=uptaken[0], uptaken_p=uptaken[1], uptaken_k=uptaken[2],
                  lost_n=lost[0], lost_p=lost[1], lost_k=lost[2],
                  runoff_today=runoff,
                  runoff_days=soil.runoff_days + (1 if runoff else 0))
    return out, NutrientTriple(*taken), runoff


def stress_factors(soil: SoilState, demand: NutrientTriple,
                   site: SiteParams) -> StressFactors:
    """Per-channel growth-limiting factors in [0, 1]."""
    span = site.sm_crit - site.wilting_point
    f_water = min(1.0, max(0.0, (soil.sm - site.wilting_point) / span))

    def f_elem(d: float, pool: float) -> float:
        if d == 0.0:
            return 1.0
        return min(1.0, max(0.0, site.r_up * pool / d))

    return StressFactors(water=f_water,
                         n=f_elem(demand.n, soil.subsoil_n),
                         p=f_elem(demand.p, soil.subsoil_p),
                         k=f_elem(demand.k, soil.subsoil_k))


def overall_stress(factors: StressFactors, limitation_mode: str) -> float:
    """Minimum over the channels the limitation mode activates; 1 if none."""
    try:
        active = LIMITATION_MODES[limitation_mode]
    except KeyError:
        raise ValueError(
            f"unknown limitation mode {limitation_mode!r}; "
            f"expected one of {sorted(LIMITATION_MODES)}"
        ) from None
    if not active:
        return 1.0
    return min(getattr(factors, name) for name in active)
