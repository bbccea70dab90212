"""The global-jitter channel.

One sampling instant of an N-probe array reads

    r_k = p(J) * a_k + sigma * n_k,    p(J) = exp(-J**2 / W**2),

with a single jitter value J ~ N(0, sigma_j**2) shared by every probe,
i.u.d. bits a_k and i.i.d. standard normal noise n_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .numerics import gh_rule, q_tail

__all__ = [
    "ChannelParams",
    "AmplitudeDistribution",
    "ArraySnapshot",
    "SnapshotBlock",
    "pulse_response",
    "amplitude_pdf",
    "amplitude_tail",
    "amplitude_tail_bound",
    "snr_db",
    "sigma_from_snr",
    "sample_block",
    "sample_snapshot",
    "ar1_jitter",
    "jitter_grid",
]


def snr_db(sigma: float) -> float:
    """SNR in dB of unit-amplitude signalling in noise of std ``sigma``."""
    if not sigma > 0:
        raise ValueError(f"snr_db needs sigma > 0, got {sigma!r}")
    return 10.0 * math.log10(1.0 / sigma**2)


def sigma_from_snr(snr: float) -> float:
    """Inverse of :func:`snr_db`; ``+inf`` dB maps to the noiseless channel."""
    if math.isinf(snr) and snr > 0:
        return 0.0
    if not math.isfinite(snr):
        raise ValueError(f"SNR must be finite or +inf, got {snr!r}")
    return 10.0 ** (-snr / 20.0)


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of one channel instance.

    ``sigma`` is in signal units; ``sigma_j`` and ``pulse_width`` share a
    length unit. ``symbol_bits`` is only used when bits are grouped into
    Reed-Solomon symbols.
    """

    sigma: float
    sigma_j: float
    pulse_width: float = 0.5
    num_probes: int = 1000
    symbol_bits: int = 10

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if not (self.sigma_j >= 0 and math.isfinite(self.sigma_j)):
            raise ValueError(f"sigma_j must be finite and >= 0, got {self.sigma_j!r}")
        if not self.pulse_width > 0:
            raise ValueError(f"pulse_width must be > 0, got {self.pulse_width!r}")
        if int(self.num_probes) != self.num_probes or self.num_probes < 1:
            raise ValueError(f"num_probes must be a positive integer, got {self.num_probes!r}")
        if int(self.symbol_bits) != self.symbol_bits or self.symbol_bits < 1:
            raise ValueError(f"symbol_bits must be a positive integer, got {self.symbol_bits!r}")

    def gamma(self) -> float:
        """Error-floor exponent W**2 / (2 sigma_j**2); infinite without jitter."""
        if self.sigma_j == 0:
            return math.inf
        return self.pulse_width**2 / (2.0 * self.sigma_j**2)

    def snr_db(self) -> float:
        return snr_db(self.sigma)

    def with_sigma(self, sigma: float) -> "ChannelParams":
        return replace(self, sigma=sigma)

    def with_snr(self, snr: float) -> "ChannelParams":
        return replace(self, sigma=sigma_from_snr(snr))

    def amplitude(self) -> "AmplitudeDistribution":
        return AmplitudeDistribution(self.sigma_j, self.pulse_width)

    def check_rs_shape(self, block_symbols: int) -> None:
        """Raise unless the probe count splits exactly into RS symbols."""
        if self.num_probes != self.symbol_bits * block_symbols:
            raise ValueError(
                f"num_probes={self.num_probes} != symbol_bits*block_symbols "
                f"= {self.symbol_bits}*{block_symbols} = {self.symbol_bits * block_symbols}"
            )


def pulse_response(J, W: float):
    """Amplitude exp(-J**2/W**2) read by a probe displaced by ``J``."""
    if not W > 0:
        raise ValueError("pulse width must be positive")
    out = np.exp(-np.square(np.asarray(J, dtype=float)) / W**2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AmplitudeDistribution:
    """Law of the jitter-degraded amplitude p = exp(-J**2/W**2), J ~ N(0, sigma_j**2).

    Expectations are taken in J-space with Gauss-Hermite quadrature, where
    the integrand is smooth; the p-space density is singular at both ends.
    """

    sigma_j: float
    pulse_width: float = 0.5

    def __post_init__(self):
        if not self.sigma_j >= 0:
            raise ValueError("sigma_j must be >= 0")
        if not self.pulse_width > 0:
            raise ValueError("pulse_width must be > 0")

    @property
    def gamma(self) -> float:
        if self.sigma_j == 0:
            return math.inf
        return self.pulse_width**2 / (2.0 * self.sigma_j**2)

    def pdf(self, p: float) -> float:
        if not 0.0 < p < 1.0:
            raise ValueError(f"amplitude density is defined on (0, 1) only, got p={p!r}")
        if self.sigma_j == 0:
            return 0.0
        log_inv = -math.log(p)
        return (
            self.pulse_width
            / math.sqrt(2.0 * math.pi * self.sigma_j**2 * log_inv)
            * p ** (self.gamma - 1.0)
        )

    def critical_jitter(self, p_c: float) -> float:
        """Jitter magnitude J_c = W sqrt(ln(1/p_c)) that degrades the amplitude to p_c."""
        return self.pulse_width * math.sqrt(-math.log(p_c))

    def tail(self, p_c: float) -> float:
        """Pr(p <= p_c) = 2 Q(J_c / sigma_j)."""
        if not 0.0 < p_c < 1.0:
            raise ValueError(f"p_c must lie in (0, 1), got {p_c!r}")
        if self.sigma_j == 0:
            return 0.0
        return 2.0 * q_tail(self.critical_jitter(p_c) / self.sigma_j)

    def tail_bound(self, p_c: float) -> float:
        """Elementary bound p_c**gamma on :meth:`tail`."""
        if not 0.0 < p_c < 1.0:
            raise ValueError(f"p_c must lie in (0, 1), got {p_c!r}")
        if self.sigma_j == 0:
            return 0.0
        return p_c**self.gamma

    def moment(self, k: float) -> float:
        """E[p**k] = 1/sqrt(1 + 2 k sigma_j**2 / W**2)."""
        return 1.0 / math.sqrt(1.0 + 2.0 * k * self.sigma_j**2 / self.pulse_width**2)

    def expect(self, func, order: int = 64) -> float:
        """E[func(p)] by Gauss-Hermite quadrature over the jitter."""
        if self.sigma_j == 0:
            return float(func(np.ones(1))[0])
        x, w = gh_rule(order)
        p = np.exp(-np.square(self.sigma_j * x) / self.pulse_width**2)
        return float(w @ np.asarray(func(p), dtype=float))

    def nodes(self, order: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Amplitude nodes and weights of the J-space Gauss-Hermite rule."""
        x, w = gh_rule(order)
        return np.exp(-np.square(self.sigma_j * x) / self.pulse_width**2), w

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        J = self.sigma_j * rng.standard_normal(size)
        return np.exp(-np.square(J) / self.pulse_width**2)


@lru_cache(maxsize=64)
def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def jitter_grid(
    sigma_j: float, pulse_width: float, resolution: float, span: float = 10.0, order: int = 8
) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude nodes and probability weights fine enough in p to resolve
    features of width ``resolution``.

    Gauss-Hermite nodes in J are spaced far apart in p once the noise is
    weak, so averages of sharp functions of p alias into a comb. Here J in
    [0, span*sigma_j] is cut into panels whose image in p is narrower than
    ``resolution`` (using max dp/dJ = sqrt(2/e)/W) and each panel gets an
    ``order``-point Gauss-Legendre rule; symmetry in J doubles the weights.
    """
    if sigma_j == 0:
        return np.ones(1), np.ones(1)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    slope = 2.0 * math.sqrt(0.5) * math.exp(-0.5) / pulse_width  # max |dp/dJ|
    j_max = span * sigma_j
    panels = max(int(math.ceil(j_max * slope / resolution)), 16)
    x, w = _gl_rule(order)
    # panels in the standard variable z = J/sigma_j keep tiny sigma_j finite
    edges = np.linspace(0.0, span, panels + 1)
    half = 0.5 * np.diff(edges)
    z = ((edges[:-1] + half)[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel() * np.exp(-0.5 * z * z)
    weights /= weights.sum()  # remove the 1e-23 truncation deficit
    return np.exp(-np.square(z * sigma_j) / pulse_width**2), weights


def amplitude_pdf(p: float, dist: AmplitudeDistribution) -> float:
    return dist.pdf(p)


def amplitude_tail(p_c: float, dist: AmplitudeDistribution) -> float:
    """Exact Pr(p <= p_c); never exceeds :func:`amplitude_tail_bound`."""
    value = dist.tail(p_c)
    assert value <= dist.tail_bound(p_c) * (1.0 + 1e-12), "tail exceeded its elementary bound"
    return value


def amplitude_tail_bound(p_c: float, dist: AmplitudeDistribution) -> float:
    return dist.tail_bound(p_c)


@dataclass(frozen=True)
class ArraySnapshot:
    """One sampling instant. ``amplitude`` is kept for the genie detector only."""

    bits: np.ndarray
    jitter: float
    amplitude: float
    outputs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.bits.setflags(write=False)
        self.outputs.setflags(write=False)


@dataclass(frozen=True)
class SnapshotBlock:
    """``count`` consecutive snapshots stored as arrays (rows are snapshots)."""

    bits: np.ndarray  # (count, N) bool
    jitter: np.ndarray  # (count,)
    amplitude: np.ndarray  # (count,)
    outputs: np.ndarray  # (count, N)

    def __len__(self) -> int:
        return self.outputs.shape[0]

    def snapshot(self, i: int) -> ArraySnapshot:
        return ArraySnapshot(
            self.bits[i].copy(), float(self.jitter[i]), float(self.amplitude[i]), self.outputs[i].copy()
        )


def sample_block(
    params: ChannelParams,
    rng: np.random.Generator,
    count: int,
    bits: np.ndarray | None = None,
    jitter: np.ndarray | None = None,
) -> SnapshotBlock:
    """Draw ``count`` snapshots.

    Draw order is fixed: jitter (count,), then bits (count, N) unless a
    pattern is supplied, then noise (count, N). ``jitter`` overrides the
    i.i.d. jitter draw (e.g. with :func:`ar1_jitter`) and consumes nothing.
    """
    N = params.num_probes
    if jitter is None:
        J = params.sigma_j * rng.standard_normal(count)
    else:
        J = np.asarray(jitter, dtype=float)
        if J.shape != (count,):
            raise ValueError(f"jitter must have shape ({count},)")
    p = np.exp(-np.square(J) / params.pulse_width**2)
    if bits is None:
        a = rng.integers(0, 2, size=(count, N), dtype=np.uint8).view(bool)
    else:
        a = np.broadcast_to(np.asarray(bits, dtype=bool), (count, N))
    noise = rng.standard_normal((count, N))
    if params.sigma != 0:
        noise *= params.sigma
    else:
        noise[...] = 0.0
    outputs = noise
    outputs += p[:, None] * a
    return SnapshotBlock(a, J, p, outputs)


def sample_snapshot(
    params: ChannelParams, rng: np.random.Generator, bits: np.ndarray | None = None
) -> ArraySnapshot:
    """A single snapshot; identical to row 0 of ``sample_block(..., count=1)``."""
    return sample_block(params, rng, 1, bits=bits).snapshot(0)


def ar1_jitter(sigma_j: float, corr_length: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary first-order autoregressive jitter with N(0, sigma_j**2)
    marginals and lag-one correlation exp(-1/corr_length)."""
    if corr_length <= 0:
        raise ValueError("corr_length must be positive")
    rho = math.exp(-1.0 / corr_length)
    innov = rng.standard_normal(count)
    J = np.empty(count)
    J[0] = innov[0]
    scale = math.sqrt(1.0 - rho * rho)
    for t in range(1, count):
        J[t] = rho * J[t - 1] + scale * innov[t]
    return sigma_j * J
