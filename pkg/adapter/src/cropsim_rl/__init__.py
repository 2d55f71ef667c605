"""Gym-style adapter package for the cropsim environment core."""

__version__ = "0.1.0"

from .adapter import AdapterEnv, make_adapter_env
from .spaces import Box, Discrete

__all__ = ["AdapterEnv", "Box", "Discrete", "make_adapter_env"]
