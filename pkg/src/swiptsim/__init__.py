"""Discrete-time simulator and per-slot optimizers for a latency- and
battery-aware power-splitting SWIPT downlink under Lyapunov drift-plus-penalty
control."""

from .config import SystemConfig, reference_config
from .model import (
    BeamDecision,
    ChannelState,
    compute_harvested_power,
    compute_sinr,
    dbm_to_watts,
    energy_consumed,
    max_harvest,
    max_rate,
    watts_to_dbm,
)
from .dynamics import NetworkState

__all__ = [
    "SystemConfig",
    "reference_config",
    "BeamDecision",
    "ChannelState",
    "NetworkState",
    "compute_sinr",
    "compute_harvested_power",
    "energy_consumed",
    "max_rate",
    "max_harvest",
    "dbm_to_watts",
    "watts_to_dbm",
]

__version__ = "0.1.0"
