"""Large-deviation analysis of non-interleaved Reed-Solomon codes on the
global-jitter channel.

Given the amplitude p, symbol errors are i.i.d. with probability e1(p) and a
sector fails when more than a fraction tau = (1-R)/2 of the N_s symbols err.
The Chernoff exponent of that event is the Bernoulli KL divergence
D(tau || e1(p)). It vanishes at the critical amplitude p_c where
e1(p_c) = tau, so for large N_s the sector error rate tends to Pr(p <= p_c),
a floor that decays only as a power of sigma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelParams
from .numerics import NoSignChangeError, RootBracket, find_root, kl_bernoulli, q_tail

__all__ = [
    "RsCode",
    "RateFunctionPoint",
    "SerBound",
    "DegenerateCriticalAmplitude",
    "cond_bit_error",
    "cond_symbol_error",
    "cond_symbol_error_linear",
    "rate_function",
    "critical_amplitude",
    "critical_amplitude_estimate",
    "ser_upper_bound",
    "high_rate_floor",
    "interleaving_block_estimate",
]


@dataclass(frozen=True)
class RsCode:
    """Symbol-level description of an (N_s, K_s) Reed-Solomon code over n-bit symbols."""

    symbol_bits: int
    block_symbols: int
    info_symbols: int

    def __post_init__(self):
        n, Ns, Ks = self.symbol_bits, self.block_symbols, self.info_symbols
        if n < 1:
            raise ValueError("symbol_bits must be >= 1")
        if not 1 <= Ns <= 2**n - 1:
            raise ValueError(f"block_symbols must lie in [1, {2**n - 1}] for {n}-bit symbols, got {Ns}")
        if not 0 < Ks < Ns:
            raise ValueError(f"info_symbols must lie in (0, {Ns}), got {Ks}")

    @classmethod
    def from_rate(cls, symbol_bits: int, block_symbols: int, rate: float) -> "RsCode":
        """K_s = round(R N_s)."""
        if not 0.0 < rate < 1.0:
            raise ValueError(f"rate must lie in (0, 1), got {rate!r}")
        return cls(symbol_bits, block_symbols, int(round(rate * block_symbols)))

    @property
    def rate(self) -> float:
        return self.info_symbols / self.block_symbols

    @property
    def tau(self) -> float:
        """Largest correctable fraction of symbol errors, (1 - R)/2."""
        return 0.5 * (1.0 - self.rate)

    @property
    def correctable(self) -> int:
        return (self.block_symbols - self.info_symbols) // 2

    @property
    def num_bits(self) -> int:
        return self.symbol_bits * self.block_symbols


class DegenerateCriticalAmplitude(NoSignChangeError):
    """Even the undegraded amplitude p = 1 gives e1 > tau; no error floor
    analysis is possible because the code fails without any jitter."""

    def __init__(self, message: str, e1_at_one: float, tau: float):
        super().__init__(message)
        self.e1_at_one = e1_at_one
        self.tau = tau


def _check_p_sigma(p, sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    if np.any(np.asarray(p) < 0) or np.any(np.asarray(p) > 1):
        raise ValueError(f"amplitude must lie in [0, 1], got {p!r}")


def cond_bit_error(p, sigma: float):
    """Bit error rate Q(p / 2 sigma) of the p/2 slicer at known amplitude p."""
    _check_p_sigma(p, sigma)
    f = q_tail(np.asarray(p, dtype=float) / (2.0 * sigma))
    bound = 0.5 * np.exp(-np.square(p) / (8.0 * sigma * sigma))
    assert np.all(f <= bound * (1.0 + 1e-12)), "Q(p/2s) exceeded its exponential bound"
    return f


def _symbol_error_from_bit(f, n: int):
    # 1 - (1 - f)**n without cancellation for tiny f
    return -np.expm1(n * np.log1p(-np.asarray(f, dtype=float)))


def cond_symbol_error(p, sigma: float, n: int):
    """Probability 1 - (1 - f)**n that an n-bit symbol holds at least one bit error."""
    if n < 1:
        raise ValueError("symbol size must be >= 1")
    out = _symbol_error_from_bit(cond_bit_error(p, sigma), n)
    return float(out) if np.ndim(out) == 0 else out


def cond_symbol_error_linear(p, sigma: float, n: int):
    """High-rate linearisation e1 ~ n f(p)."""
    out = n * np.asarray(cond_bit_error(p, sigma))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RateFunctionPoint:
    """Chernoff decay rate (nats per symbol) of the sector error event at amplitude p."""

    p: float
    e1: float
    lambda_c: float
    value: float


def _rate_from_e1(tau: float, p: float, e1: float) -> RateFunctionPoint:
    if e1 <= 0.0:
        return RateFunctionPoint(p, 0.0, math.inf, math.inf)
    e0 = 1.0 - e1
    lam = math.log(e0 / e1) + math.log(tau / (1.0 - tau))
    if e1 >= tau:
        return RateFunctionPoint(p, e1, min(lam, 0.0), 0.0)
    return RateFunctionPoint(p, e1, lam, kl_bernoulli(tau, e1))


def rate_function(tau: float, p: float, sigma: float, n: int) -> RateFunctionPoint:
    """I(tau, p) = D(tau || e1(p)) when e1(p) < tau, else 0 (no exponential decay).

    ``lambda_c`` is the optimal Chernoff parameter ln((e0/e1)(tau/(1-tau))),
    positive exactly when the bound is nontrivial.
    """
    if not 0.0 < tau < 0.5:
        raise ValueError(f"tau must lie in (0, 1/2), got {tau!r}")
    return _rate_from_e1(tau, p, cond_symbol_error(p, sigma, n))


@lru_cache(maxsize=4096)
def _critical_ratio(tau: float, n: int) -> float:
    """x_c = p_c / sigma solving 1 - (1 - Q(x/2))**n = tau."""
    g = lambda x: float(_symbol_error_from_bit(q_tail(0.5 * x), n)) - tau  # noqa: E731
    return find_root(g, RootBracket(0.0, 80.0, 1e-13))


def critical_amplitude(tau: float, sigma: float, n: int) -> float:
    """Amplitude p_c with e1(p_c) = tau.

    e1 depends on p/sigma only, so the root is found once per (tau, n) in
    the variable x = p/sigma and scaled; p_c is exactly linear in sigma.
    Raises :class:`DegenerateCriticalAmplitude` when e1(1) > tau.
    """
    if not 0.0 < tau < 0.5:
        raise ValueError(f"tau must lie in (0, 1/2), got {tau!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    e1_one = cond_symbol_error(1.0, sigma, n)
    if e1_one > tau:
        raise DegenerateCriticalAmplitude(
            f"e1(p=1) = {e1_one:.4g} exceeds tau = {tau:.4g} at sigma = {sigma:.4g}: "
            "the code fails even without jitter",
            e1_one,
            tau,
        )
    p_c = min(sigma * _critical_ratio(float(tau), int(n)), 1.0)
    assert p_c <= critical_amplitude_estimate(tau, sigma, n) * (1.0 + 1e-12)
    return p_c


def critical_amplitude_estimate(tau: float, sigma: float, n: int) -> float:
    """High-rate estimate sigma sqrt(8 ln(n / 2 tau)); never below the exact p_c."""
    return sigma * math.sqrt(8.0 * math.log(n / (2.0 * tau)))


@dataclass(frozen=True)
class SerBound:
    """Asymptotic upper bound on the sector error rate: floor + Laplace correction."""

    p_c: float
    floor_term: float
    laplace_term: float
    curvature: float

    @property
    def total(self) -> float:
        return self.floor_term + self.laplace_term

    def __iter__(self):
        return iter((self.floor_term, self.laplace_term, self.total))


def _kl_curve(tau: float, sigma: float, n: int):
    # untruncated D(tau || e1(p)); smooth through p_c where it vanishes
    def F(p: float) -> float:
        e1 = float(_symbol_error_from_bit(q_tail(p / (2.0 * sigma)), n))
        if e1 == tau:
            return 0.0
        return (1.0 - tau) * (math.log1p(-tau) - math.log1p(-e1)) + tau * (math.log(tau) - math.log(e1))

    return F


def ser_upper_bound(params: ChannelParams, code: RsCode, block_symbols: int | None = None) -> SerBound:
    """Pr(SE) <~ Pr(p <= p_c) + rho_P(p_c) sqrt(pi / (N_s F''(p_c))).

    F'' is a central second difference of D(tau || e1(p)) with step 1e-4 p_c.
    ``block_symbols`` overrides N_s in the Laplace term (the code fixes tau).
    """
    Ns = code.block_symbols if block_symbols is None else int(block_symbols)
    tau, n, s = code.tau, code.symbol_bits, params.sigma
    p_c = critical_amplitude(tau, s, n)
    dist = params.amplitude()
    if p_c >= 1.0:
        return SerBound(p_c, 1.0, 0.0, math.nan)
    if params.sigma_j == 0:
        return SerBound(p_c, 0.0, 0.0, math.nan)
    F = _kl_curve(tau, s, n)
    h = 1e-4 * p_c
    curv = (F(p_c + h) - 2.0 * F(p_c) + F(p_c - h)) / (h * h)
    laplace = dist.pdf(p_c) * math.sqrt(math.pi / (Ns * curv))
    return SerBound(p_c, dist.tail(p_c), laplace, curv)


def high_rate_floor(params: ChannelParams, code: RsCode) -> tuple[float, float]:
    """Power-law floor Pr(SE) <~ coeff * sigma**gamma valid for tau << 1.

    Returns (coeff, gamma) with coeff = (8 ln(n / 2 tau))**(W**2 / 4 sigma_j**2)
    and gamma = W**2 / (2 sigma_j**2); on an SNR axis the floor falls by
    gamma/20 decades per dB regardless of rate or block size.
    """
    tau = code.tau
    if tau > 0.15:
        warnings.warn(
            f"tau = {tau:.3f} > 0.15: the high-rate floor approximation is coarse here",
            stacklevel=2,
        )
    if params.sigma_j == 0:
        return 0.0, math.inf
    gamma = params.gamma()
    coeff = (8.0 * math.log(code.symbol_bits / (2.0 * tau))) ** (0.5 * gamma)
    return coeff, gamma


def interleaving_block_estimate(num_probes: int, corr_length: int) -> int:
    """Bits an interleaver must span to average over jitter: about 1e3 N L."""
    if num_probes < 1 or corr_length < 1:
        raise ValueError("num_probes and corr_length must be >= 1")
    return 1000 * int(num_probes) * int(corr_length)
