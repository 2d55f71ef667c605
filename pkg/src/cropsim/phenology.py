"""Crop development stage from thermal time, with perennial dormancy.

Annual crops accumulate thermal time from sowing; the development stage
(dvs) runs 0 -> 1 -> 2 (emergence, anthesis, maturity). Perennials add a
dormancy state machine: induction by short day length once dvs >= 1 (or by
prolonged growth stagnation), release after a minimum duration, sufficient
chill accumulation, and a warm 7-day spell. Grape stage onsets (Bud Break,
Bloom, Veraison) are thermal-time threshold crossings after release.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import date as Date

from .weather import WeatherDay, WeatherSeries, day_length

#: Day-of-year sentinel reported when a stage is not reached within a year.
UNREACHED_DOY = 366

_T_WINDOW = 7  # days of mean temperature kept for the release check


class Stage(enum.IntEnum):
    DORMANT = 0
    BUDBREAK = 1
    BLOOM = 2
    VERAISON = 3


@dataclass(frozen=True, slots=True)
class PhenologyParams:
    """Thermal-time and dormancy parameters.

    The grape stage model is the 7-tuple (tbase, chill_req, force_bb,
    force_bl, force_ve, dlcrit, tchill_max); the remaining fields drive
    annual development and dormancy timing.
    """

    tbase: float  # degC, base temperature for thermal accumulation
    tsum1: float  # degC.day, emergence -> anthesis
    tsum2: float  # degC.day, anthesis -> maturity
    perennial: bool = False
    chill_req: float = 50.0  # chill units to release dormancy
    force_bb: float = 100.0  # degC.day to Bud Break after release
    force_bl: float = 400.0  # degC.day to Bloom
    force_ve: float = 900.0  # degC.day to Veraison
    dlcrit: float = 12.5  # h, induction day length
    tchill_max: float = 10.0  # degC, upper bound of chill-effective band
    dorm_min: float = 45.0  # days, minimum dormancy duration
    stag_max: int = 21  # consecutive zero-growth days triggering dormancy
    trelease: float = 8.0  # degC, 7-day mean threshold for release

    def validate(self) -> None:
        if not self.tbase < self.tchill_max:
            raise ValueError(f"TBASE ({self.tbase}) must be < TCHILL_MAX ({self.tchill_max})")
        if not (0 < self.force_bb < self.force_bl < self.force_ve):
            raise ValueError(
                "forcing thresholds must satisfy 0 < FORCE_BB < FORCE_BL < FORCE_VE, "
                f"got ({self.force_bb}, {self.force_bl}, {self.force_ve})"
            )
        if self.tsum1 <= 0 or self.tsum2 <= 0:
            raise ValueError("TSUM1 and TSUM2 must be positive")
        if self.dorm_min < 0:
            raise ValueError("DORM_MIN must be >= 0")
        if self.stag_max < 1:
            raise ValueError("STAG_MAX must be >= 1")


@dataclass(frozen=True, slots=True)
class PhenologyState:
    dvs: float = 0.0
    tsum: float = 0.0
    chill: float = 0.0
    dormant: bool = False
    dormancy_days: int = 0
    stagnation_days: int = 0
    t_recent: tuple[float, ...] = ()  # trailing daily means, release check


def initial_state(params: PhenologyParams) -> PhenologyState:
    """Perennials start the simulation dormant; annuals start growing."""
    return PhenologyState(dormant=params.perennial)


def step_phenology(state: PhenologyState, params: PhenologyParams,
                   day: WeatherDay, day_len: float) -> PhenologyState:
    """Advance one day.

    Non-dormant: thermal increment max(0, t_avg - TBASE) accrues to tsum and
    advances dvs at rate 1/TSUM1 below dvs 1, 1/TSUM2 up to the cap of 2.
    Perennials enter dormancy when day length drops below DLCRIT after
    dvs >= 1, or after STAG_MAX consecutive zero-growth days; entry resets
    dvs, tsum and chill. Release requires DORM_MIN days, CHILL_REQ chill
    units (one unit per dormant day with t_avg in [0, TCHILL_MAX]) and a
    7-day mean temperature above TRELEASE.
    """
    t = day.t_avg
    window = (state.t_recent + (t,))[-_T_WINDOW:]

    if state.dormant:
        chill = state.chill + (1.0 if 0.0 <= t <= params.tchill_max else 0.0)
        dormancy_days = state.dormancy_days + 1
        release = (
            dormancy_days >= params.dorm_min
            and chill >= params.chill_req
            and sum(window) / len(window) > params.trelease
        )
        if release:
            return PhenologyState(dvs=0.0, tsum=0.0, chill=0.0, dormant=False,
                                  dormancy_days=0, stagnation_days=0,
                                  t_recent=window)
        return PhenologyState(dvs=0.0, tsum=0.0, chill=chill, dormant=True,
                              dormancy_days=dormancy_days, stagnation_days=0,
                              t_recent=window)

    inc = max(0.0, t - params.tbase)
    tsum = state.tsum + inc
    if state.dvs < 1.0:
        dvs = state.dvs + inc / params.tsum1
    elif state.dvs < 2.0:
        dvs = state.dvs + inc / params.tsum2
    else:
        dvs = state.dvs
    dvs = min(dvs, 2.0)
    stagnation = 0 if inc > 0.0 else state.stagnation_days + 1

    if params.perennial and ((day_len < params.dlcrit and dvs >= 1.0)
                             or stagnation >= params.stag_max):
        return PhenologyState(dvs=0.0, tsum=0.0, chill=0.0, dormant=True,
                              dormancy_days=0, stagnation_days=0,
                              t_recent=window)
    return PhenologyState(dvs=dvs, tsum=tsum, chill=state.chill, dormant=False,
                          dormancy_days=state.dormancy_days,
                          stagnation_days=stagnation, t_recent=window)


def grape_stage(state: PhenologyState, params: PhenologyParams) -> Stage:
    """Current grape stage: thresholds are inclusive crossings of tsum.

    A released vine below FORCE_BB still reports Dormant (ecodormancy).
    """
    if state.dormant:
        return Stage.DORMANT
    if state.tsum >= params.force_ve:
        return Stage.VERAISON
    if state.tsum >= params.force_bl:
        return Stage.BLOOM
    if state.tsum >= params.force_bb:
        return Stage.BUDBREAK
    return Stage.DORMANT


@dataclass(frozen=True)
class YearOnsets:
    year: int
    budbreak: int
    bloom: int
    veraison: int

    def doy(self, stage: Stage) -> int:
        return (self.budbreak, self.bloom, self.veraison)[int(stage) - 1]


@dataclass(frozen=True)
class ForcingCurve:
    """Per-year daily (doy, tsum-after-step, dormant-after-step) trajectory.

    Stage onsets are first inclusive crossings of the forcing thresholds on
    the non-dormant part of this curve; the curve itself does not depend on
    the thresholds, so threshold-only parameter changes can reuse it.
    """

    year: int
    doys: tuple[int, ...]
    tsums: tuple[float, ...]
    dormant: tuple[bool, ...]

    def onset(self, force: float) -> int:
        for doy, tsum, dorm in zip(self.doys, self.tsums, self.dormant):
            if not dorm and tsum >= force:
                return doy
        return UNREACHED_DOY


def forcing_curves(params: PhenologyParams, series: WeatherSeries) -> list[ForcingCurve]:
    """Run the dormancy/thermal-time state machine over whole calendar years."""
    if series.start != Date(series.start.year, 1, 1) or \
            series.end != Date(series.end.year, 12, 31):
        raise ValueError(
            "series must span whole calendar years "
            f"(got {series.start} .. {series.end})"
        )
    state = initial_state(params)
    lat = series.latitude
    curves: list[ForcingCurve] = []
    doys: list[int] = []
    tsums: list[float] = []
    dorm: list[bool] = []
    year = series.start.year
    for day in series.days:
        if day.date.year != year:
            curves.append(ForcingCurve(year, tuple(doys), tuple(tsums), tuple(dorm)))
            doys, tsums, dorm = [], [], []
            year = day.date.year
        doy = day.date.timetuple().tm_yday
        state = step_phenology(state, params, day, day_length(lat, doy))
        doys.append(doy)
        tsums.append(state.tsum)
        dorm.append(state.dormant)
    curves.append(ForcingCurve(year, tuple(doys), tuple(tsums), tuple(dorm)))
    return curves


def predict_stage_onsets(params: PhenologyParams,
                         series: WeatherSeries) -> list[YearOnsets]:
    """First day-of-year each grape stage is reached, per calendar year.

    A stage not reached within a year reports the sentinel 366, which keeps
    calibration losses finite while strongly penalizing degenerate
    parameters. Onset means the stage is reached *or passed* that day, so
    onsets are always ordered budbreak <= bloom <= veraison.
    """
    out = []
    for curve in forcing_curves(params, series):
        out.append(YearOnsets(
            year=curve.year,
            budbreak=curve.onset(params.force_bb),
            bloom=curve.onset(params.force_bl),
            veraison=curve.onset(params.force_ve),
        ))
    return out
