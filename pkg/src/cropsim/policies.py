"""Built-in agromanagement baseline policies.

A policy is a pure mapping (day_index, features) -> action index, bound to
an action discretization at construction. The catalog covers the usual
baselines: do nothing, random exploration, fixed fertilization intervals,
moisture-triggered irrigation, alternating nitrogen/water schedules,
budget-capped application, maximal application, and explicit schedules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .config import ValidationError
from .env import Action, ActionSpec, Channel, encode_action

_CHANNELS = {"N": Channel.N, "P": Channel.P, "K": Channel.K, "Water": Channel.WATER}


@dataclass(frozen=True)
class Policy:
    name: str
    action_spec: ActionSpec
    params: dict
    _fn: Callable[[int, Mapping[str, float]], int]

    def __call__(self, day_index: int, features: Mapping[str, float]) -> int:
        index = self._fn(day_index, features)
        if not 0 <= index < self.action_spec.count:
            raise ValidationError(
                f"policy {self.name!r} emitted index {index} outside the "
                f"bound action space of size {self.action_spec.count}"
            )
        return index


def _channel(name: str) -> Channel:
    try:
        return _CHANNELS[name]
    except KeyError:
        raise ValidationError(
            f"unknown channel {name!r}; expected one of {sorted(_CHANNELS)}"
        ) from None


def _clamp_level(level: int, spec: ActionSpec, channel: Channel) -> int:
    top = spec.m if channel is Channel.WATER else spec.n
    return max(0, min(int(level), top - 1))


def _max_safe_level(headroom: float, increment: float, top: int) -> int:
    """Largest level whose amount keeps the cumulative total within budget."""
    if headroom <= 0 or increment <= 0:
        return 0
    return min(top - 1, int(headroom / increment + 1e-9))


def builtin_policy(name: str, spec: ActionSpec | None = None, **params) -> Policy:
    """Construct one of the 10 cataloged policies.

    no_op; random(seed); interval_fert(channel, level, period);
    threshold_irrigate(level, threshold); biweekly_NW(level);
    monthly_NW(level); apply_until_limits(fert_limit, irrig_limit);
    max_everything; fert_only_schedule(schedule); irrigate_only_schedule(schedule).
    """
    spec = spec or ActionSpec()
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValidationError(
            f"unknown policy {name!r}; available: {sorted(_CATALOG)}"
        ) from None
    fn = factory(spec, dict(params))
    return Policy(name=name, action_spec=spec, params=dict(params), _fn=fn)


def _no_op(spec: ActionSpec, params: dict):
    return lambda day, obs: 0


def _random(spec: ActionSpec, params: dict):
    seed = int(params.get("seed", 0))

    def fn(day: int, obs: Mapping[str, float]) -> int:
        # Hash-style rng keyed by (seed, day) keeps the mapping pure.
        return int(np.random.default_rng([seed, day]).integers(spec.count))

    return fn


def _interval_fert(spec: ActionSpec, params: dict):
    channel = _channel(str(params.get("channel", "N")))
    if channel is Channel.WATER:
        raise ValidationError("interval_fert needs a fertilizer channel")
    level = _clamp_level(params.get("level", spec.n - 1), spec, channel)
    period = int(params.get("period", 7))
    if period < 1:
        raise ValidationError("period must be >= 1")
    idx = encode_action(spec, channel, level)
    return lambda day, obs: idx if day % period == 0 else 0


def _threshold_irrigate(spec: ActionSpec, params: dict):
    level = _clamp_level(params.get("level", spec.m - 1), spec, Channel.WATER)
    threshold = float(params.get("threshold", 0.20))
    idx = encode_action(spec, Channel.WATER, level)
    return lambda day, obs: idx if obs["SM"] < threshold else 0


def _alternating_nw(spec: ActionSpec, period: int, params: dict):
    fert_level = _clamp_level(params.get("level", spec.n - 1), spec, Channel.N)
    water_level = _clamp_level(params.get("level", spec.m - 1), spec, Channel.WATER)
    n_idx = encode_action(spec, Channel.N, fert_level)
    w_idx = encode_action(spec, Channel.WATER, water_level)

    def fn(day: int, obs: Mapping[str, float]) -> int:
        if day % period != 0:
            return 0
        return n_idx if (day // period) % 2 == 0 else w_idx

    return fn


def _biweekly_nw(spec: ActionSpec, params: dict):
    return _alternating_nw(spec, 14, params)


def _monthly_nw(spec: ActionSpec, params: dict):
    return _alternating_nw(spec, 30, params)


def _apply_until_limits(spec: ActionSpec, params: dict):
    fert_limit = float(params.get("fert_limit", 80.0))
    irrig_limit = float(params.get("irrig_limit", 40.0))

    def fn(day: int, obs: Mapping[str, float]) -> int:
        if day % 2 == 0:
            applied = obs["TOTN"] + obs["TOTP"] + obs["TOTK"]
            level = _max_safe_level(fert_limit - applied, spec.f, spec.n)
            if level > 0:
                return encode_action(spec, Channel.N, level)
            return 0
        level = _max_safe_level(irrig_limit - obs["TOTIRRIG"], spec.i, spec.m)
        if level > 0:
            return encode_action(spec, Channel.WATER, level)
        return 0

    return fn


def _max_everything(spec: ActionSpec, params: dict):
    rotation = [encode_action(spec, Channel.N, spec.n - 1),
                encode_action(spec, Channel.P, spec.n - 1),
                encode_action(spec, Channel.K, spec.n - 1),
                encode_action(spec, Channel.WATER, spec.m - 1)]
    return lambda day, obs: rotation[day % 4]


def _parse_schedule(entries, spec: ActionSpec, water_only: bool):
    table: dict[int, int] = {}
    for entry in entries:
        if water_only:
            day, level = entry
            channel = Channel.WATER
        else:
            day, channel_name, level = entry
            channel = _channel(str(channel_name))
            if channel is Channel.WATER:
                raise ValidationError("fert_only_schedule cannot irrigate")
        table[int(day)] = encode_action(spec, channel,
                                        _clamp_level(level, spec, channel))
    return table


def _fert_only_schedule(spec: ActionSpec, params: dict):
    table = _parse_schedule(params.get("schedule", ()), spec, water_only=False)
    return lambda day, obs: table.get(day, 0)


def _irrigate_only_schedule(spec: ActionSpec, params: dict):
    table = _parse_schedule(params.get("schedule", ()), spec, water_only=True)
    return lambda day, obs: table.get(day, 0)


_CATALOG = {
    "no_op": _no_op,
    "random": _random,
    "interval_fert": _interval_fert,
    "threshold_irrigate": _threshold_irrigate,
    "biweekly_NW": _biweekly_nw,
    "monthly_NW": _monthly_nw,
    "apply_until_limits": _apply_until_limits,
    "max_everything": _max_everything,
    "fert_only_schedule": _fert_only_schedule,
    "irrigate_only_schedule": _irrigate_only_schedule,
}

POLICY_NAMES = tuple(sorted(_CATALOG))
