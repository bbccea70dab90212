"""Bit detectors for one array snapshot and the LLN optimality-gap bound.

Three threshold detectors are compared:

* genie: knows the realised amplitude p and slices at p/2,
* lln:   slices at the sample mean T_N of the N outputs (never sees p),
* fixed: slices every probe at one precomputed single-probe ML threshold r0.

All of them break ties (r == threshold) towards bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelParams, jitter_grid
from .numerics import RootBracket, find_root

__all__ = [
    "DETECTOR_KINDS",
    "DetectionResult",
    "genie_detect",
    "lln_detect",
    "fixed_threshold_detect",
    "detect_block",
    "optimal_single_probe_threshold",
    "amplitude_second_moment",
    "gap_bound",
    "eps_min",
]

DetectorKind = Literal["genie", "lln", "fixed"]
DETECTOR_KINDS = ("genie", "lln", "fixed")


@dataclass(frozen=True)
class DetectionResult:
    estimated_bits: np.ndarray
    threshold_used: float
    detector_kind: DetectorKind


def _slice(outputs, threshold) -> np.ndarray:
    return np.asarray(outputs, dtype=float) > threshold


def genie_detect(outputs, p: float) -> DetectionResult:
    """MAP bit decisions given the true amplitude: bit k is 1 iff r_k > p/2."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"amplitude must lie in (0, 1], got {p!r}")
    t = 0.5 * p
    return DetectionResult(_slice(outputs, t), t, "genie")


def lln_detect(outputs) -> DetectionResult:
    """Slice at the sample mean of the outputs.

    For i.u.d. bits the mean converges to p/2, so this approaches the genie
    without ever seeing p. With heavily unbalanced input the threshold is
    biased and the decisions degrade; nothing here checks for that.
    """
    r = np.asarray(outputs, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one output")
    t = float(r.mean())
    return DetectionResult(r > t, t, "lln")


def fixed_threshold_detect(outputs, r0: float) -> DetectionResult:
    return DetectionResult(_slice(outputs, r0), float(r0), "fixed")


def detect_block(kind: str, outputs: np.ndarray, amplitude: np.ndarray | None = None, r0: float | None = None):
    """Decisions for a (count, N) block of snapshots, row by row.

    ``amplitude`` (count,) is only consulted by the genie and ``r0`` only by
    the fixed detector.
    """
    if kind == "genie":
        if amplitude is None:
            raise ValueError("genie detection needs the amplitudes")
        return outputs > 0.5 * np.asarray(amplitude)[:, None]
    if kind == "lln":
        return outputs > outputs.mean(axis=1, keepdims=True)
    if kind == "fixed":
        if r0 is None:
            raise ValueError("fixed detection needs a threshold r0")
        return outputs > r0
    raise ValueError(f"unknown detector {kind!r}; expected one of {DETECTOR_KINDS}")


def optimal_single_probe_threshold(params: ChannelParams, tol: float = 1e-10) -> float:
    """Crossing r0 of the jitter-averaged '1' density and the N(0, sigma**2) '0' density.

    The log-likelihood ratio h(r) = log E_p[exp((r p - p**2/2)/sigma**2)] is
    increasing in r, negative at r = 0 and nonnegative at r = 1/2 (zero only
    without jitter), so the root lies in (0, 1/2] and is unique. The average
    over p uses a J-grid resolving sigma, since the sharp likelihood
    aliases on Gauss-Hermite nodes in weak noise.
    """
    s = params.sigma
    if not s > 0:
        raise ValueError("the ML threshold needs sigma > 0")
    if params.sigma_j == 0:
        return 0.5
    p, w = jitter_grid(params.sigma_j, params.pulse_width, resolution=0.25 * s)
    keep = w > 0
    p, logw = p[keep], np.log(w[keep])
    half_p2 = 0.5 * p * p

    def llr(r: float) -> float:
        return float(logsumexp(logw + (r * p - half_p2) / (s * s)))

    return find_root(llr, RootBracket(0.0, 0.5, tol))


def amplitude_second_moment(params: ChannelParams) -> float:
    """E(p**2) = 1/sqrt(1 + 4 sigma_j**2 / W**2)."""
    return 1.0 / math.sqrt(1.0 + 4.0 * params.sigma_j**2 / params.pulse_width**2)


def gap_bound(params: ChannelParams) -> float:
    """Upper bound on BER_lln - BER_genie for an N-probe array."""
    s = params.sigma
    if not s > 0:
        raise ValueError("gap_bound needs sigma > 0")
    ep2 = amplitude_second_moment(params)
    return 3.0 * (1.0 + ep2 / (4.0 * s * s)) ** (1.0 / 3.0) / (2.0 * math.pi * params.num_probes) ** (1.0 / 3.0)


def eps_min(params: ChannelParams) -> float:
    """Threshold-deviation scale that balances the two terms of the gap bound."""
    s = params.sigma
    if not s > 0:
        raise ValueError("eps_min needs sigma > 0")
    ep2 = amplitude_second_moment(params)
    return ((ep2 / 4.0 + s * s) * math.sqrt(2.0 * math.pi * s * s) / params.num_probes) ** (1.0 / 3.0)
