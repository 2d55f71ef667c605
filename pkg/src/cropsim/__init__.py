"""cropsim: deterministic crop-growth simulation with an RL environment
layer, grape phenology calibration, baseline policies, and data generation.
"""

__version__ = "0.1.0"

from .config import (AgroConfig, RunBundle, ValidationError, dump_run_config,
                     list_crops, list_sites, load_agro_config)
from .engine import (DEFAULT_MASK, FEATURE_NAMES, MINIMAL_MASK, DailyRecord,
                     EpisodeLog, SimState, Simulation, init_simulation,
                     run_episode, step_day, yield_of)
from .env import (Action, ActionSpec, Channel, CropEnv, MultiFarmEnv,
                  RandomizationConfig, RewardConfig, compute_reward,
                  decode_action, encode_action, make_env, make_multi_farm_env)
from .policies import POLICY_NAMES, Policy, builtin_policy
from .soil import ActionAmounts
from .weather import (WeatherDay, WeatherSeries, day_length,
                      load_weather_table, synth_weather)

__all__ = [
    "Action", "ActionAmounts", "ActionSpec", "AgroConfig", "Channel",
    "CropEnv", "DailyRecord", "DEFAULT_MASK", "EpisodeLog", "FEATURE_NAMES",
    "MINIMAL_MASK", "MultiFarmEnv", "Policy", "POLICY_NAMES",
    "RandomizationConfig", "RewardConfig", "RunBundle", "SimState",
    "Simulation", "ValidationError", "WeatherDay", "WeatherSeries",
    "builtin_policy", "compute_reward", "day_length", "decode_action",
    "dump_run_config", "encode_action", "init_simulation", "list_crops",
    "list_sites", "load_agro_config", "load_weather_table", "make_env",
    "make_multi_farm_env", "run_episode", "step_day", "synth_weather",
    "yield_of",
]
