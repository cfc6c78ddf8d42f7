"""Packet-size optimization for slotted Aloha random access.

Analytical mean queueing delay for connection-free (CF) and connection-based
(CB) slotted Aloha, an integer packet-size optimizer, the CF/CB trade-off
thresholds, a slot-level simulator and non-terrestrial network studies.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    ConfigError,
    DomainError,
    FitError,
    InfeasibleError,
    InvalidPacketSize,
    NoFiniteDelayError,
    PacketizationError,
    RateOverflow,
    SaturationError,
)
from .lambertw import exp_w0, lambert_w0  # noqa: E402
from .model import (  # noqa: E402
    NetworkParams,
    Scheme,
    evaluate_curve,
    feasibility,
    mean_delay_seconds,
    min_packet_size,
    service_moments,
)
from .optimizer import optimize_packet_size, parameter_sweep  # noqa: E402
from .tradeoff import classify_region, thresholds  # noqa: E402

__all__ = [
    "BracketError", "ConfigError", "DomainError", "FitError", "InfeasibleError",
    "InvalidPacketSize", "NoFiniteDelayError", "PacketizationError", "RateOverflow",
    "SaturationError", "NetworkParams", "Scheme", "classify_region", "evaluate_curve",
    "exp_w0", "feasibility", "lambert_w0", "mean_delay_seconds", "min_packet_size",
    "optimize_packet_size", "parameter_sweep", "service_moments", "thresholds",
]
