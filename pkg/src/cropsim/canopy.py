"""Biomass assimilation, respiration, partitioning, death, age decline.

A light-use-efficiency canopy: gross growth is conversion efficiency times
intercepted irradiation times a [0, 1] stress factor. Perennial aging
reduces conversion efficiency and raises maintenance respiration linearly
per year, both capped to keep long horizons physical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

# Age-decline safety caps: conversion efficiency never falls below this
# fraction of its young-plant value, respiration never rises above this
# multiple.
EPS_AGE_FLOOR = 0.2
RESP_AGE_CAP = 3.0


@dataclass(frozen=True, slots=True)
class OrganPools:
    """Dry-matter pools in kg/ha; storage is the harvested yield."""

    roots: float = 0.0
    stems: float = 0.0
    leaves: float = 0.0
    storage: float = 0.0

    def validate(self) -> None:
        for name in ("roots", "stems", "leaves", "storage"):
            if getattr(self, name) < 0:
                raise ValueError(f"organ pool {name} negative")

    def total(self) -> float:
        return self.roots + self.stems + self.leaves + self.storage


@dataclass(frozen=True, slots=True)
class GrowthIncrements:
    roots: float = 0.0
    stems: float = 0.0
    leaves: float = 0.0
    storage: float = 0.0


@dataclass(frozen=True)
class CanopyParams:
    eps: float  # kg/ha gross per MJ/m2 intercepted
    k_ext: float  # canopy light extinction coefficient
    sla: float  # m2 leaf per kg leaf
    q10: float  # respiration temperature sensitivity
    maint_roots: float  # 1/day maintenance coefficients
    maint_stems: float
    maint_leaves: float
    maint_storage: float
    part_table: tuple[tuple[float, float, float, float, float], ...]
    # knots (dvs, f_roots, f_stems, f_leaves, f_storage), fractions sum to 1
    death_table: tuple[tuple[float, float, float, float, float], ...]
    # knots (dvs, d_roots, d_stems, d_leaves, d_storage), relative rates/day
    a_age: float  # respiration increase per year of age
    b_age: float  # conversion-efficiency loss per year of age

    def validate(self) -> None:
        if self.eps < 0 or self.k_ext <= 0 or self.sla <= 0 or self.q10 <= 0:
            raise ValueError("eps, k_ext, sla, q10 must be positive")
        if len(self.part_table) < 2:
            raise ValueError("part_table needs at least two knots")
        for knot in self.part_table:
            fracs = knot[1:]
            if any(f < 0 or f > 1 for f in fracs):
                raise ValueError(f"partition fractions outside [0,1] at dvs={knot[0]}")
            if abs(sum(fracs) - 1.0) > 1e-9:
                raise ValueError(f"partition fractions do not sum to 1 at dvs={knot[0]}")
        for knot in self.death_table:
            if any(d < 0 or d > 1 for d in knot[1:]):
                raise ValueError(f"death rates outside [0,1] at dvs={knot[0]}")
        for table in (self.part_table, self.death_table):
            dvs = [k[0] for k in table]
            if sorted(dvs) != dvs:
                raise ValueError("table knots must be sorted by dvs")
        if self.a_age < 0 or self.b_age < 0:
            raise ValueError("age coefficients must be >= 0")


def _interp_row(table: tuple[tuple[float, ...], ...], dvs: float) -> tuple[float, ...]:
    """Piecewise-linear interpolation over the 4 value columns, clamped at ends."""
    if dvs <= table[0][0]:
        return table[0][1:]
    if dvs >= table[-1][0]:
        return table[-1][1:]
    for (x0, *y0), (x1, *y1) in zip(table, table[1:]):
        if x0 <= dvs <= x1:
            w = (dvs - x0) / (x1 - x0)
            return tuple(a + w * (b - a) for a, b in zip(y0, y1))
    raise AssertionError("unreachable: table scan failed")


def lai_of(organs: OrganPools, params: CanopyParams) -> float:
    # m2/kg x kg/ha -> m2/ha; divide by 1e4 m2/ha for m2/m2
    return organs.leaves * params.sla / 1e4


def age_efficiency(age: float, params: CanopyParams) -> float:
    return max(1.0 - params.b_age * age, EPS_AGE_FLOOR)


def daily_assimilation(lai: float, irradiation: float, stress: float,
                       age: float, params: CanopyParams) -> float:
    """Gross assimilation, kg/ha/day."""
    if not 0.0 <= stress <= 1.0:
        raise ValueError(f"stress must be in [0,1], got {stress}")
    eps = params.eps * age_efficiency(age, params)
    return eps * irradiation * (1.0 - math.exp(-params.k_ext * lai)) * stress


def maintenance_respiration(organs: OrganPools, t_avg: float, age: float,
                            params: CanopyParams) -> float:
    """Maintenance cost, kg/ha/day."""
    base = (params.maint_roots * organs.roots
            + params.maint_stems * organs.stems
            + params.maint_leaves * organs.leaves
            + params.maint_storage * organs.storage)
    age_factor = min(1.0 + params.a_age * age, RESP_AGE_CAP)
    return base * params.q10 ** ((t_avg - 25.0) / 10.0) * age_factor


def partition_growth(organs: OrganPools, net: float, dvs: float,
                     surface_excess: bool, params: CanopyParams) -> GrowthIncrements:
    """Split net growth across organs.

    Positive net follows the dvs-interpolated partition fractions; when
    surface nutrient levels are excessive the storage fraction is halved and
    the freed share goes equally to stems and leaves. Negative net drains
    storage first, then leaves, never below zero.
    """
    if net == 0.0:
        return GrowthIncrements()
    if net > 0.0:
        f_roots, f_stems, f_leaves, f_storage = _interp_row(params.part_table, dvs)
        if surface_excess:
            shifted = f_storage / 2.0
            f_storage -= shifted
            f_stems += shifted / 2.0
            f_leaves += shifted / 2.0
        return GrowthIncrements(net * f_roots, net * f_stems,
                                net * f_leaves, net * f_storage)
    deficit = -net
    from_storage = min(organs.storage, deficit)
    from_leaves = min(organs.leaves, deficit - from_storage)
    return GrowthIncrements(0.0, 0.0, -from_leaves, -from_storage)


def apply_growth(organs: OrganPools, inc: GrowthIncrements) -> OrganPools:
    return OrganPools(organs.roots + inc.roots, organs.stems + inc.stems,
                      organs.leaves + inc.leaves, organs.storage + inc.storage)


def apply_death_rates(organs: OrganPools, dvs: float, is_perennial: bool,
                      dormant: bool, params: CanopyParams) -> OrganPools:
    """Stage-dependent relative death; dormant perennials shed leaves and
    storage while roots and stems persist."""
    d_roots, d_stems, d_leaves, d_storage = _interp_row(params.death_table, dvs)
    out = OrganPools(organs.roots * (1.0 - d_roots),
                     organs.stems * (1.0 - d_stems),
                     organs.leaves * (1.0 - d_leaves),
                     organs.storage * (1.0 - d_storage))
    if is_perennial and dormant:
        out = replace(out, leaves=0.0, storage=0.0)
    return out
