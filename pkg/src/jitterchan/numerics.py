"""Shared numerical kernel: Gaussian tail, Bernoulli KL, quadrature,
bracketed root finding and scalar maximisation.

Every analytic module goes through these helpers, so the tolerances in
``DEFAULT_QUADRATURE`` and friends set the accuracy floor of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import special

__all__ = [
    "ConvergenceError",
    "NoSignChangeError",
    "QuadratureSpec",
    "GaussianLine",
    "RootBracket",
    "DEFAULT_QUADRATURE",
    "CAPACITY_QUADRATURE",
    "SIMPSON_QUADRATURE",
    "q_tail",
    "kl_bernoulli",
    "gh_rule",
    "gaussian_expectation",
    "integrate_1d",
    "find_root",
    "maximize_scalar",
]

PHI = (math.sqrt(5.0) - 1.0) / 2.0  # inverse golden ratio
_EDGE = 1e-9


class ConvergenceError(RuntimeError):
    """Quadrature did not reach its tolerance within the refinement budget."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (last estimate {estimate!r}, error estimate {error!r})")
        self.estimate = estimate
        self.error = error


class NoSignChangeError(ValueError):
    """The function has the same sign at both ends of the bracket."""


@dataclass(frozen=True)
class QuadratureSpec:
    """How ``integrate_1d`` evaluates an integral.

    ``order`` is the Gauss-Hermite node count, or the number of initial
    panels for adaptive Simpson. ``max_refinements`` bounds the number of
    order doublings (Gauss-Hermite) or the bisection depth (Simpson).
    """

    method: Literal["gauss-hermite", "adaptive-simpson"] = "gauss-hermite"
    order: int = 64
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_refinements: int = 4

    def __post_init__(self):
        if self.method not in ("gauss-hermite", "adaptive-simpson"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.order < 2:
            raise ValueError("quadrature order must be >= 2")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("abs_tol and rel_tol cannot both be zero")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be positive")


DEFAULT_QUADRATURE = QuadratureSpec()
CAPACITY_QUADRATURE = QuadratureSpec(order=128)
SIMPSON_QUADRATURE = QuadratureSpec(method="adaptive-simpson", order=16, max_refinements=40)


@dataclass(frozen=True)
class GaussianLine:
    """The real line weighted by the normal law N(mean, std**2)."""

    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError("std must be nonnegative")


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol: float = 1e-10

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty bracket [{self.lo}, {self.hi}]")
        if not self.tol > 0:
            raise ValueError("bracket tolerance must be positive")


def q_tail(x):
    """Standard normal upper tail Pr(Z > x); accepts scalars or arrays."""
    out = special.ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def kl_bernoulli(t: float, e: float) -> float:
    """KL divergence (nats) of Bernoulli(t) from Bernoulli(e)."""
    if not (0.0 < t < 1.0 and 0.0 < e < 1.0):
        raise ValueError(f"kl_bernoulli needs t, e in (0, 1); got t={t!r}, e={e!r}")
    if t == e:
        return 0.0
    # log1p keeps the (1-t)/(1-e) branch accurate when e and t are tiny
    value = (1.0 - t) * (math.log1p(-t) - math.log1p(-e)) + t * (math.log(t) - math.log(e))
    return max(value, 0.0)


@lru_cache(maxsize=None)
def _gh_cached(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gh_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite nodes and weights; weights sum to one,
    so ``w @ f(x)`` approximates E[f(Z)] for standard normal Z."""
    if order < 2:
        raise ValueError("Gauss-Hermite order must be >= 2")
    return _gh_cached(int(order))


def gaussian_expectation(f: Callable, mean: float = 0.0, std: float = 1.0, order: int = 64) -> float:
    """Single fixed-order Gauss-Hermite estimate of E[f(X)], X ~ N(mean, std**2)."""
    x, w = gh_rule(order)
    return float(w @ _eval_vectorized(f, mean + std * x))


def _eval_vectorized(f: Callable, x: np.ndarray) -> np.ndarray:
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(f(float(xi))) for xi in x])


def integrate_1d(
    f: Callable,
    domain: tuple[float, float] | GaussianLine,
    spec: QuadratureSpec | None = None,
    singular_endpoints: tuple[bool, bool] = (False, False),
) -> float:
    """Integrate ``f`` over an interval, or take its expectation under a
    Gaussian measure when ``domain`` is a :class:`GaussianLine`.

    ``singular_endpoints`` flags integrable endpoint singularities on a finite
    interval; those endpoints are never evaluated. Raises
    :class:`ConvergenceError` when the refinement budget runs out.
    """
    if isinstance(domain, GaussianLine):
        spec = spec or DEFAULT_QUADRATURE
        if spec.method != "gauss-hermite":
            raise ValueError("a Gaussian-weighted domain needs the gauss-hermite method")
        return _integrate_gh(f, domain, spec)
    spec = spec or SIMPSON_QUADRATURE
    a, b = (float(v) for v in domain)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("interval endpoints must be finite")
    if a == b:
        return 0.0
    if a > b:
        return -integrate_1d(f, (b, a), spec, singular_endpoints[::-1])
    if spec.method != "adaptive-simpson":
        raise ValueError("a finite interval needs the adaptive-simpson method")
    g = _desingularise(f, a, b, *singular_endpoints)
    if g is not f:
        a, b = 0.0, 1.0
    return _integrate_simpson(g, a, b, spec)


def _integrate_gh(f: Callable, domain: GaussianLine, spec: QuadratureSpec) -> float:
    order = spec.order
    previous = gaussian_expectation(f, domain.mean, domain.std, order)
    if domain.std == 0:
        return float(f(domain.mean))
    err = math.inf
    for _ in range(spec.max_refinements):
        order *= 2
        current = gaussian_expectation(f, domain.mean, domain.std, order)
        err = abs(current - previous)
        if err <= max(spec.abs_tol, spec.rel_tol * abs(current)):
            return current
        previous = current
    raise ConvergenceError("Gauss-Hermite quadrature did not converge", previous, err)


def _desingularise(f: Callable, a: float, b: float, left: bool, right: bool) -> Callable:
    """Polynomial change of variables whose Jacobian vanishes at flagged ends."""
    if not (left or right):
        return f
    span = b - a
    if left and right:
        s = lambda u: u * u * (3.0 - 2.0 * u)  # noqa: E731
        ds = lambda u: 6.0 * u * (1.0 - u)  # noqa: E731
    elif left:
        s = lambda u: u * u  # noqa: E731
        ds = lambda u: 2.0 * u  # noqa: E731
    else:
        s = lambda u: 1.0 - (1.0 - u) ** 2  # noqa: E731
        ds = lambda u: 2.0 * (1.0 - u)  # noqa: E731

    def g(u: float) -> float:
        # never touch a flagged endpoint: step just inside where the
        # transformed integrand is already at its finite limit
        if left and u < _EDGE:
            u = _EDGE
        if right and u > 1.0 - _EDGE:
            u = 1.0 - _EDGE
        x = a + span * s(u)
        if left and x <= a:
            x = math.nextafter(a, b)
        if right and x >= b:
            x = math.nextafter(b, a)
        return float(f(x)) * span * ds(u)

    return g


def _integrate_simpson(f: Callable, a: float, b: float, spec: QuadratureSpec) -> float:
    edges = np.linspace(a, b, spec.order + 1)
    panels = []
    coarse = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = float(f(lo)), float(f(mid)), float(f(hi))
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        coarse += whole
        panels.append((lo, hi, flo, fmid, fhi, whole, 0))
    tol = max(spec.abs_tol, spec.rel_tol * abs(coarse))
    total = 0.0
    err_total = 0.0
    failed = False
    stack = panels[::-1]
    while stack:
        lo, hi, flo, fmid, fhi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = float(f(lm)), float(f(rm))
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        local_tol = tol * (hi - lo) / (b - a)
        if abs(delta) <= 15.0 * local_tol or depth >= spec.max_refinements:
            if abs(delta) > 15.0 * local_tol:
                failed = True
            total += left + right + delta / 15.0
            err_total += abs(delta) / 15.0
            continue
        stack.append((mid, hi, fmid, frm, fhi, right, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, depth + 1))
    if failed or not math.isfinite(total):
        raise ConvergenceError("adaptive Simpson hit its refinement limit", total, err_total)
    return total


def find_root(f: Callable[[float], float], bracket: RootBracket) -> float:
    """Bisection root of ``f`` on ``bracket``; the final bracket is at most
    ``bracket.tol`` wide and the midpoint is returned."""
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoSignChangeError(f"no sign change on [{lo}, {hi}]: f(lo)={flo!r}, f(hi)={fhi!r}")
    while hi - lo > bracket.tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # bracket below float resolution
            break
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def maximize_scalar(f: Callable[[float], float], interval: Sequence[float], tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section maximisation of a unimodal ``f``; endpoints compete
    with the interior optimum, so boundary maxima are returned exactly."""
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    fa, fb = f(a), f(b)
    x1 = b - PHI * (b - a)
    x2 = a + PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    lo, hi = a, b
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + PHI * (hi - lo)
            f2 = f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    if fa >= best_f:
        best_x, best_f = a, fa
    if fb > best_f:
        best_x, best_f = b, fb
    return best_x, best_f
