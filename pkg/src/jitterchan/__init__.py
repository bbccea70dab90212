"""Simulation and performance limits of the global-jitter probe-storage channel."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    AmplitudeDistribution,
    ArraySnapshot,
    ChannelParams,
    sample_snapshot,
    sigma_from_snr,
    snr_db,
)
from .rs import RsCode  # noqa: E402
from .sim import ErrorCounts, SweepSpec  # noqa: E402

__all__ = [
    "__version__",
    "AmplitudeDistribution",
    "ArraySnapshot",
    "ChannelParams",
    "ErrorCounts",
    "RsCode",
    "SweepSpec",
    "sample_snapshot",
    "sigma_from_snr",
    "snr_db",
]
