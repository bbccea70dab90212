"""Capacity, random coding and Fano bounds for the global-jitter channel.

Units: capacities, rates, E0 and E are in bits (block error <= 2**(-N E));
nats appear only inside the Laplace-term arithmetic of :func:`rcb_bound`.

Conditioned on the amplitude p the channel is a binary-input AWGN channel
with levels {0, p}; everything depends on f = p / sigma only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from .channel import AmplitudeDistribution, ChannelParams, jitter_grid
from .numerics import (
    CAPACITY_QUADRATURE,
    NoSignChangeError,
    QuadratureSpec,
    RootBracket,
    find_root,
    gh_rule,
    integrate_1d,
    maximize_scalar,
)

__all__ = [
    "CapacityPoint",
    "ExponentPoint",
    "RcbBound",
    "FanoBound",
    "DegenerateRate",
    "c_awgn",
    "c_awgn_ratio",
    "c_awgn_asymptotic",
    "capacity_global",
    "capacity_independent",
    "capacity_point",
    "gallager_e0",
    "error_exponent",
    "critical_ratio",
    "rcb_bound",
    "fano_bound",
    "power_law_fit",
    "rcb_independent",
]

LN2 = math.log(2.0)
_F_HERMITE = 2.0  # Gauss-Hermite in u up to here, panels in v = f u beyond
_F_SATURATED = 60.0  # beyond this 1 - C_AWGN < 1e-190
_E0_SATURATED = 30.0  # beyond this E0(rho) = rho to double precision


class DegenerateRate(NoSignChangeError):
    """The rate exceeds C_AWGN(p=1): even an undegraded read cannot support it."""


def _shifted_kernel(v: np.ndarray) -> np.ndarray:
    """log(1 + e**v) * e**(-v/2), evaluated without overflow."""
    out = np.empty_like(v)
    pos = v >= 0
    vp = v[pos]
    out[pos] = (vp + np.log1p(np.exp(-vp))) * np.exp(-0.5 * vp)
    vn = v[~pos]
    u = np.exp(vn)
    ratio = np.where(u > 1e-8, np.log1p(u) / np.where(u > 0, u, 1.0), 1.0 - 0.5 * u)
    out[~pos] = np.exp(0.5 * vn) * ratio
    return out


@lru_cache(maxsize=1)
def _kernel_panels(half_width: float = 90.0, order: int = 8):
    # unit-width Gauss-Legendre panels; the kernel's nearest complex
    # singularities sit at v = +-i pi, so 8 points per panel reach ~1e-16
    x, w = np.polynomial.legendre.leggauss(order)
    mids = np.arange(-half_width, half_width) + 0.5
    v = (mids[:, None] + 0.5 * x[None, :]).ravel()
    wv = np.tile(0.5 * w, mids.size)
    return v, wv, _shifted_kernel(v)


def c_awgn_ratio(f, order: int = CAPACITY_QUADRATURE.order):
    """C_AWGN as a function of f = p / sigma (bits), scalar or array.

    Writes 1 - C = e**(-f**2/8) E_u[log(1 + e**(f u)) e**(-f u / 2)] / ln 2,
    u standard normal; this shifted form keeps the Gauss-Hermite integrand
    free of the kink at u = f/2 that the textbook form has. Above f = 2 the
    kernel is narrower than the Hermite node spacing and the average is
    taken over v = f u on fixed panels instead (relative error in 1 - C
    near 1e-13 in both regimes).
    """
    f_arr = np.abs(np.atleast_1d(np.asarray(f, dtype=float)))
    u, w = gh_rule(order)
    out = np.zeros_like(f_arr)
    live = (f_arr > 0) & (f_arr <= _F_HERMITE)
    fl = f_arr[live]
    kern = _shifted_kernel(fl[:, None] * u[None, :])
    out[live] = 1.0 - np.exp(-fl * fl / 8.0) * (kern @ w) / LN2
    # for larger f the kernel is narrower than the Hermite node spacing in u;
    # integrate in v = f u instead, where it has unit width
    wide = (f_arr > _F_HERMITE) & (f_arr < _F_SATURATED)
    fw = f_arr[wide]
    v, wv, kv = _kernel_panels()
    dens = np.exp(-0.5 * np.square(v[None, :] / fw[:, None])) / (fw[:, None] * math.sqrt(2.0 * math.pi))
    out[wide] = 1.0 - np.exp(-fw * fw / 8.0) * (dens @ (wv * kv)) / LN2
    out[f_arr >= _F_SATURATED] = 1.0
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(f) == 0 else out.reshape(np.shape(f))


def c_awgn(p, sigma: float):
    """Capacity in bits of the {0, p} input AWGN channel with uniform inputs."""
    if not sigma > 0:
        raise ValueError(f"c_awgn needs sigma > 0, got {sigma!r}")
    if np.any(np.asarray(p) < 0):
        raise ValueError("amplitude must be nonnegative")
    return c_awgn_ratio(np.asarray(p, dtype=float) / sigma)


def c_awgn_asymptotic(p: float, sigma: float) -> float:
    """Weak-noise expansion 1 - sqrt(2 pi)/(f ln 2) e**(-f**2/8)."""
    f = p / sigma
    if f <= 4.0:
        warnings.warn(f"weak-noise expansion is inaccurate for f = p/sigma = {f:.3g} <= 4", stacklevel=2)
    return 1.0 - math.sqrt(2.0 * math.pi) / (f * LN2) * math.exp(-f * f / 8.0)


def capacity_global(params: ChannelParams, order: int = CAPACITY_QUADRATURE.order) -> float:
    """Per-probe i.u.d. capacity E_p[C_AWGN(p)] of the global-jitter channel.

    The receiver of a long array learns p, so each probe sees an AWGN
    channel of known amplitude; the average runs over J with Gauss-Hermite.
    """
    s = params.sigma
    if not s > 0:
        raise ValueError("capacity needs sigma > 0")
    if params.sigma_j == 0:
        return c_awgn_ratio(1.0 / s)
    p, w = params.amplitude().nodes(order)
    return float(w @ c_awgn_ratio(p / s))


def capacity_independent(params: ChannelParams, spec: QuadratureSpec | None = None) -> float:
    """Per-probe mutual information when each probe jitters independently.

    The '1' output density is the mixture w1(r) = E_p N(r; p, sigma**2) and
    the receiver cannot learn p. The outer integral over r runs adaptively
    on [-8 sigma, 1 + 8 sigma]; the mixture uses a J-grid resolving sigma
    in p (Gauss-Hermite in J aliases into a comb once sigma is small).
    """
    s = params.sigma
    if not s > 0:
        raise ValueError("capacity needs sigma > 0")
    if params.sigma_j == 0:
        return c_awgn_ratio(1.0 / s)
    spec = spec or QuadratureSpec(method="adaptive-simpson", order=64, abs_tol=1e-10, rel_tol=1e-8, max_refinements=40)
    p, w = jitter_grid(params.sigma_j, params.pulse_width, resolution=0.25 * s)
    keep = w > 0
    p, logw = p[keep], np.log(w[keep])
    norm = -0.5 * math.log(2.0 * math.pi * s * s)

    def integrand(r: float) -> float:
        l0 = norm - 0.5 * (r / s) ** 2
        l1 = norm + float(logsumexp(logw - 0.5 * ((r - p) / s) ** 2))
        lm = np.logaddexp(l0, l1) - LN2
        return 0.5 * (math.exp(l0) * (l0 - lm) + math.exp(l1) * (l1 - lm)) / LN2

    return integrate_1d(integrand, (-8.0 * s, 1.0 + 8.0 * s), spec)


@dataclass(frozen=True)
class CapacityPoint:
    snr_db: float
    c_awgn_at_p1: float
    c_global: float
    c_independent: float


def capacity_point(params: ChannelParams, independent: bool = True) -> CapacityPoint:
    c1 = c_awgn_ratio(1.0 / params.sigma)
    cg = capacity_global(params)
    ci = capacity_independent(params) if independent else math.nan
    return CapacityPoint(params.snr_db(), c1, cg, ci)


def _logcosh(v: np.ndarray) -> np.ndarray:
    a = np.abs(v)
    return a + np.log1p(np.exp(-2.0 * a)) - LN2


def _e0_ratio(rho: float, f: float, order: int = CAPACITY_QUADRATURE.order) -> float:
    if rho == 0.0 or f == 0.0:
        return 0.0
    if f > _E0_SATURATED:
        return float(rho)
    y, w = gh_rule(order)
    lc = (1.0 + rho) * _logcosh(f * y / (2.0 * (1.0 + rho)))
    log_mean = float(logsumexp(lc, b=w))
    return max((f * f / 8.0 - log_mean) / LN2, 0.0)


def gallager_e0(rho: float, p: float, sigma: float) -> float:
    """Gallager function (bits) of the {0, p} AWGN channel with uniform inputs.

    E0(rho) = -log2 int [w0**(1/(1+rho))/2 + w1**(1/(1+rho))/2]**(1+rho) dr,
    rewritten around the midpoint p/2 as
    f**2/(8 ln 2) - log2 E_y[cosh(f y / (2 (1+rho)))**(1+rho)].
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if p < 0:
        raise ValueError("amplitude must be nonnegative")
    return _e0_ratio(float(rho), p / sigma)


@dataclass(frozen=True)
class ExponentPoint:
    p: float
    sigma: float
    R: float
    rho_star: float
    E: float


def _exponent_ratio(R: float, f: float, capacity: float | None = None) -> tuple[float, float]:
    C = c_awgn_ratio(f) if capacity is None else capacity
    if R >= C:
        return 0.0, 0.0
    rho, val = maximize_scalar(lambda r: _e0_ratio(r, f) - r * R, (0.0, 1.0), tol=1e-10)
    return rho, max(val, 0.0)


def error_exponent(R: float, p: float, sigma: float) -> ExponentPoint:
    """Random coding exponent E(R, p) = max_{0<=rho<=1} E0(rho) - rho R (bits)."""
    if not 0.0 < R < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {R!r}")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    rho, E = _exponent_ratio(R, p / sigma)
    return ExponentPoint(p, sigma, R, rho, E)


@lru_cache(maxsize=4096)
def critical_ratio(R: float) -> float:
    """x_c = p_c / sigma with C_AWGN(x_c) = R."""
    if not 0.0 < R < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {R!r}")
    return find_root(lambda x: c_awgn_ratio(x) - R, RootBracket(0.0, _F_SATURATED, 1e-12))


def _critical_amplitude(R: float, sigma: float) -> float:
    x_c = critical_ratio(float(R))
    p_c = sigma * x_c
    if p_c > 1.0:
        raise DegenerateRate(
            f"C_AWGN(p=1) = {c_awgn_ratio(1.0 / sigma):.4g} < R = {R:.4g} at sigma = {sigma:.4g}"
        )
    return p_c


@dataclass(frozen=True)
class RcbBound:
    """Large-N random coding bound: floor Pr(p < p_c) plus a Laplace term."""

    p_c: float
    floor_term: float
    laplace_term: float
    high_rate_tail_bound: float  # p_c**gamma
    high_rate_floor: float  # (-8 ln(1-R))**(W**2/4 sigma_j**2) * sigma**gamma

    @property
    def total(self) -> float:
        return self.floor_term + self.laplace_term

    def __iter__(self):
        return iter((self.floor_term, self.laplace_term, self.total))


def _exponent_curvature(R: float, f: float) -> float:
    """d2E/dR2 (bits) at R = C(f) from the R < C side.

    E vanishes identically above capacity, so second differences centred
    at R - 2h and R - 4h are extrapolated linearly back to R.
    """
    h = 1e-3 * R
    C = c_awgn_ratio(f)
    E = lambda r: _exponent_ratio(r, f, C)[1]  # noqa: E731

    def second(c):
        return (E(c - h) - 2.0 * E(c) + E(c + h)) / (h * h)

    d1, d2 = second(R - 2.0 * h), second(R - 4.0 * h)
    return 2.0 * d1 - d2


def _capacity_slope(x: float) -> float:
    """dC/dx by Richardson-extrapolated central differences, relative step 1e-3."""
    h = 1e-3 * x

    def D(step):
        return (c_awgn_ratio(x + step) - c_awgn_ratio(x - step)) / (2.0 * step)

    return (4.0 * D(h) - D(2.0 * h)) / 3.0


def rcb_bound(R: float, N: int, params: ChannelParams) -> RcbBound:
    """Random coding bound on the block error rate at block length N.

    For large N, E_p[2**(-N E(R, p))] concentrates on p <= p_c where
    C_AWGN(p_c) = R. The Laplace term expands E(R, p) to second order
    above p_c: E ~ E''_R (C'_p)**2 (p - p_c)**2 / 2.
    """
    if not 0.0 < R < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {R!r}")
    if N < 1:
        raise ValueError("block length must be >= 1")
    s = params.sigma
    if not s > 0:
        raise ValueError("sigma must be > 0")
    p_c = _critical_amplitude(R, s)
    dist = params.amplitude()
    gamma = params.gamma()
    if params.sigma_j == 0:
        return RcbBound(p_c, 0.0, 0.0, 0.0, 0.0)
    if p_c >= 1.0:
        return RcbBound(p_c, 1.0, 0.0, 1.0, math.nan)
    x_c = p_c / s
    curv_nats = _exponent_curvature(R, x_c) * LN2
    slope_p = _capacity_slope(x_c) / s
    laplace = dist.pdf(p_c) * math.sqrt(math.pi / (N * curv_nats * slope_p * slope_p))
    coeff = (-8.0 * math.log1p(-R)) ** (0.5 * gamma)
    return RcbBound(p_c, dist.tail(p_c), laplace, p_c**gamma, coeff * s**gamma)


@dataclass(frozen=True)
class FanoBound:
    """Block-size independent lower bounds on the block error rate at rate R."""

    p_c: float
    exact_floor: float  # int_{p <= p_c} (1 - C(p)/R) dmu
    weak_floor: float  # max(0, 1 - C_global / R)
    errf_floor: float  # power-law form I(R) W sigma**gamma / sqrt(2 pi sigma_j**2 ln(1/p_c))

    def __iter__(self):
        return iter((self.exact_floor, self.weak_floor))


def _floor_integral(R: float, s: float, dist: AmplitudeDistribution, p_c: float) -> float:
    """Integral of 1 - C(p)/R over p <= p_c, taken in J from J_c outward."""
    sj, W = dist.sigma_j, dist.pulse_width
    J_c = dist.critical_jitter(p_c)
    upper = max(J_c, 0.0) + 12.0 * sj
    dens = 2.0 / (sj * math.sqrt(2.0 * math.pi))

    def g(J: float) -> float:
        p = math.exp(-J * J / (W * W))
        return dens * math.exp(-0.5 * (J / sj) ** 2) * (1.0 - c_awgn_ratio(p / s) / R)

    spec = QuadratureSpec(method="adaptive-simpson", order=32, abs_tol=0.0, rel_tol=1e-9, max_refinements=40)
    val = integrate_1d(g, (J_c, upper), spec)
    return min(max(val, 0.0), dist.tail(p_c) if p_c < 1.0 else 1.0)


def _errf_integral(R: float, x_c: float, gamma: float) -> float:
    """I(R) = int_0^{x_c} (dx/x_c) x**gamma (1 - C(x)/R)."""
    spec = QuadratureSpec(method="adaptive-simpson", order=32, abs_tol=0.0, rel_tol=1e-10, max_refinements=40)
    # x**gamma has an unbounded derivative at 0 once gamma < 1
    g = lambda x: x**gamma * (1.0 - c_awgn_ratio(x) / R)  # noqa: E731
    return integrate_1d(g, (0.0, x_c), spec, singular_endpoints=(gamma < 1.0, False)) / x_c


def fano_bound(R: float, params: ChannelParams) -> FanoBound:
    """Fano lower bounds on the large-N block error rate of any non-interleaved code."""
    if not 0.0 < R < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {R!r}")
    s = params.sigma
    if not s > 0:
        raise ValueError("sigma must be > 0")
    p_c = _critical_amplitude(R, s)
    weak = max(0.0, 1.0 - capacity_global(params) / R)
    if params.sigma_j == 0:
        return FanoBound(p_c, 0.0, weak, 0.0)
    dist = params.amplitude()
    exact = float(_floor_integral(R, s, dist, p_c))
    gamma = params.gamma()
    log_inv = -math.log(p_c)
    errf = float(
        _errf_integral(R, p_c / s, gamma)
        * params.pulse_width
        * s**gamma
        / math.sqrt(2.0 * math.pi * params.sigma_j**2 * log_inv)
    )
    return FanoBound(p_c, exact, weak, errf)


def power_law_fit(sigmas, values) -> tuple[float, float]:
    """Least-squares exponent of values ~ const * sigma**k on log-log axes; returns (k, r**2)."""
    x = np.asarray(sigmas, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.size < 4:
        raise ValueError("need at least 4 matching (sigma, value) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive sigmas and values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


class _IndependentJitterChannel:
    """Output log-densities of the per-probe (independent) jitter channel on a fixed r-grid."""

    def __init__(self, params: ChannelParams, points_per_sigma: int = 8):
        s = params.sigma
        n = int(math.ceil((1.0 + 16.0 * s) / s * points_per_sigma)) | 1  # odd for Simpson
        self.r = np.linspace(-8.0 * s, 1.0 + 8.0 * s, n)
        p, w = jitter_grid(params.sigma_j, params.pulse_width, resolution=0.25 * s)
        keep = w > 0
        p, logw = p[keep], np.log(w[keep])
        norm = -0.5 * math.log(2.0 * math.pi * s * s)
        self.l0 = norm - 0.5 * (self.r / s) ** 2
        chunks = [
            norm + logsumexp(logw[None, :] - 0.5 * ((r[:, None] - p[None, :]) / s) ** 2, axis=1)
            for r in np.array_split(self.r, max(1, len(self.r) * len(p) // 2_000_000))
        ]
        self.l1 = np.concatenate(chunks)

    def e0(self, rho: float) -> float:
        if rho == 0.0:
            return 0.0
        a = 1.0 + rho
        inner = np.logaddexp(self.l0 / a, self.l1 / a) - LN2
        vals = np.exp(a * inner)
        return max(-math.log2(simpson(vals, x=self.r)), 0.0)


def rcb_independent(R: float, N: int, params: ChannelParams) -> float:
    """Random coding bound min(1, 2**(-N E(R))) for N probes with independent jitter.

    This is the reference channel without shared jitter: its exponent is
    fixed by the mixture output density, so the bound falls like a waterfall
    in SNR instead of flattening into a floor.
    """
    if not 0.0 < R < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {R!r}")
    if not params.sigma > 0:
        raise ValueError("sigma must be > 0")
    if params.sigma_j == 0:
        _, E = _exponent_ratio(R, 1.0 / params.sigma)
    else:
        ch = _IndependentJitterChannel(params)
        _, val = maximize_scalar(lambda r: ch.e0(r) - r * R, (0.0, 1.0), tol=1e-8)
        E = max(val, 0.0)
    return min(1.0, 2.0 ** (-N * E))
