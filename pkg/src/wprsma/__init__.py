"""Scheduling for wirelessly powered rate-splitting IoT networks."""

from .model import (ChannelRealization, DecodingOrder, EnergyViolation, Mode, NetworkConfig,
                    Schedule, SlotDecision, sample_channels, validate_schedule)

__all__ = [
    "ChannelRealization", "DecodingOrder", "EnergyViolation", "Mode", "NetworkConfig",
    "Schedule", "SlotDecision", "sample_channels", "validate_schedule",
]
