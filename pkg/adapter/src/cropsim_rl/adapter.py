"""Gym-style adapter over the cropsim environment core.

The adapter owns no simulation logic: it exchanges flat float64 buffers for
observations and JSON-round-tripped mappings for info payloads, so the core
stays the single source of truth for dynamics. The API is the standard
reset/step surface: ``reset(seed) -> (observation, info)`` and
``step(action) -> (observation, reward, terminated, truncated, info)``.
"""

from __future__ import annotations

import json

import numpy as np

from cropsim import (ActionSpec, CropEnv, MultiFarmEnv, RewardConfig,
                     load_agro_config, make_env, make_multi_farm_env)
from cropsim.config import bundled_agro_path
from cropsim.engine import DEFAULT_MASK

from .spaces import Box, Discrete


class AdapterEnv:
    """Wraps a core environment behind the de-facto RL environment API."""

    metadata = {"render_modes": []}

    def __init__(self, core: CropEnv | MultiFarmEnv):
        self._core = core
        self.observation_space = Box(low=-np.inf, high=np.inf,
                                     shape=(core.observation_length,))
        self.action_space = Discrete(core.action_count)

    @property
    def env_id(self) -> str:
        return self._core.env_id

    @property
    def unwrapped(self) -> CropEnv | MultiFarmEnv:
        return self._core

    def _buffer(self, obs) -> np.ndarray:
        out = np.asarray(obs, dtype=np.float64).reshape(-1)
        if out.shape != self.observation_space.shape:
            raise RuntimeError(
                f"core returned observation of shape {out.shape}, "
                f"expected {self.observation_space.shape}")
        return out

    def reset(self, seed: int | None = None, options=None):
        obs = self._core.reset(seed=seed)
        return self._buffer(obs), {}

    def step(self, action):
        action = int(action)
        if not self.action_space.contains(action):
            raise ValueError(
                f"action {action} outside Discrete({self.action_space.n})")
        obs, reward, terminated, truncated, info = self._core.step(action)
        # info crosses the boundary as JSON
        info = json.loads(json.dumps(info, sort_keys=True))
        return (self._buffer(obs), float(reward), bool(terminated),
                bool(truncated), info)

    def close(self) -> None:
        pass


def make_adapter_env(config: str, overrides=(), reward: str = "yield",
                     reward_params: dict | None = None, mask=DEFAULT_MASK,
                     action_spec: ActionSpec | None = None, n_farms: int = 1,
                     seed: int = 0) -> AdapterEnv:
    """Build an adapter from an agromanagement config path or bundled name."""
    try:
        path = bundled_agro_path(config)
    except Exception:
        path = config
    bundle = load_agro_config(path, overrides)
    if seed is not None:  # same semantics as the core CLI's --seed
        bundle = bundle.with_agro(random_seed=int(seed))
    reward_cfg = RewardConfig(kind=reward, **(reward_params or {}))
    if n_farms > 1:
        core = make_multi_farm_env([bundle] * n_farms, reward=reward_cfg,
                                   mask=mask, action_spec=action_spec, seed=seed)
    else:
        core = make_env(bundle, reward=reward_cfg, mask=mask,
                        action_spec=action_spec, seed=seed)
    return AdapterEnv(core)
