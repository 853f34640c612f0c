"""Transceiver design and evaluation for two-hop relay interference networks."""

__version__ = "0.1.0"

from .channel import ChannelRealization, TrialStream, generate_channels
from .config import NetworkShape, StoppingRule, SystemConfig, parse_shape, symmetric_config
from .network import NetworkState, effective_channels, feasible_init, random_init
from .total_leakage import TotalLeakageMinimizer, tl_run
from .wmse import (
    NO_POWER_CONTROL,
    POWER_CONTROL,
    POWER_CONTROL_PER_RELAY,
    WeightedMseMinimizer,
    WmseVariant,
    wmse_run,
)

__all__ = [
    "ChannelRealization",
    "NetworkShape",
    "NetworkState",
    "NO_POWER_CONTROL",
    "POWER_CONTROL",
    "POWER_CONTROL_PER_RELAY",
    "StoppingRule",
    "SystemConfig",
    "TotalLeakageMinimizer",
    "TrialStream",
    "WeightedMseMinimizer",
    "WmseVariant",
    "__version__",
    "effective_channels",
    "feasible_init",
    "generate_channels",
    "parse_shape",
    "random_init",
    "symmetric_config",
    "tl_run",
    "wmse_run",
]
