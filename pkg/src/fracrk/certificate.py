"""The rational function r(lambda) = prod (lambda + xi_j)/(lambda - xi_j) and its sup-norm.

For negative poles xi_j every factor has modulus below one on the positive
axis, so ||r||_Sigma is the quantity that certifies a pole set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .discretize import SpectralInterval
from .functions import ParametricFunction, bound_constant, classify

__all__ = [
    "CROUZEIX",
    "LogSignedValue",
    "Certificate",
    "r_eval",
    "r_abs",
    "r_derivatives",
    "interior_extrema",
    "certify",
    "certify_bruteforce",
    "error_bound",
]

CROUZEIX = 11.08
_SCAN_POINTS = 20
_NEWTON_MAXITER = 80
_BISECT_MAXITER = 200
_BRACKET_RTOL = 1e-13
# Ritz values used as poles may leave an exact interval by rounding
_RANGE_RTOL = 1e-12


def _pole_array(poles) -> np.ndarray:
    xi = np.asarray(getattr(poles, "poles", poles), dtype=float).ravel()
    if np.any(xi >= 0.0) or not np.all(np.isfinite(xi)):
        raise ValueError("poles must be finite negative reals")
    return xi


@dataclass(frozen=True)
class LogSignedValue:
    """sign * exp(logabs); sign 0 goes with logabs = -inf."""

    logabs: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if (self.sign == 0) != (self.logabs == -math.inf):
            raise ValueError("sign 0 must pair with logabs = -inf")

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(min(self.logabs, 709.0))

    def __float__(self) -> float:
        return self.value

    def __mul__(self, other: "LogSignedValue") -> "LogSignedValue":
        if self.sign == 0 or other.sign == 0:
            return LogSignedValue(-math.inf, 0)
        return LogSignedValue(self.logabs + other.logabs, self.sign * other.sign)


def _log_signed(num: np.ndarray, den: np.ndarray) -> LogSignedValue:
    if np.any(num == 0.0):
        return LogSignedValue(-math.inf, 0)
    logabs = math.fsum(np.log(np.abs(num))) - math.fsum(np.log(np.abs(den)))
    negatives = int(np.count_nonzero(num < 0.0)) + int(np.count_nonzero(den < 0.0))
    return LogSignedValue(logabs, -1 if negatives % 2 else 1)


def r_eval(poles, lam: float) -> LogSignedValue:
    """r_Xi(lambda) in log-signed form; exactly zero at lambda = -xi_j."""
    xi = _pole_array(poles)
    lam = float(lam)
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    return _log_signed(lam + xi, lam - xi)


def r_abs(poles, lam) -> np.ndarray:
    """|r_Xi| on an array of positive points (vectorized).

    Each factor lies in (-1, 1) on the positive axis, so the plain product
    has relative error of order k * eps; summing logarithms would add an
    absolute error of that size to log |r| times the magnitude of the logs.
    """
    xi = _pole_array(poles)
    x = np.asarray(lam, dtype=float)
    if xi.size == 0:
        return np.ones_like(x)
    return np.abs(np.prod((x[..., None] + xi) / (x[..., None] - xi), axis=-1))


def r_derivatives(poles, lam: float) -> tuple[float, float, float]:
    """(r, r', r'') at lambda via the leave-one-out product formulas.

    r'  = -2 sum_j xi_j / (lambda - xi_j)^2 r_j
    r'' = -2 sum_j xi_j / (lambda - xi_j)^2 (r_j' - 2 r_j / (lambda - xi_j))
    where r_j omits the j-th pole.
    """
    xi = _pole_array(poles)
    lam = float(lam)
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    r = r_eval(xi, lam).value
    if xi.size == 0:
        return r, 0.0, 0.0
    d1_terms, d2_terms = [], []
    for j in range(xi.size):
        rest = np.delete(xi, j)
        rj = r_eval(rest, lam).value
        if rest.size:
            rj_prime = -2.0 * math.fsum(
                rest[i] / (lam - rest[i]) ** 2 * r_eval(np.delete(rest, i), lam).value
                for i in range(rest.size)
            )
        else:
            rj_prime = 0.0
        w = xi[j] / (lam - xi[j]) ** 2
        d1_terms.append(w * rj)
        d2_terms.append(w * (rj_prime - 2.0 * rj / (lam - xi[j])))
    return r, -2.0 * math.fsum(d1_terms), -2.0 * math.fsum(d2_terms)


def _logderiv(xi: np.ndarray, lam: float) -> tuple[float, float]:
    """phi = r'/r and phi' = d phi / d lambda."""
    p = lam + xi
    q = lam - xi
    phi = float(np.sum(1.0 / p) - np.sum(1.0 / q))
    dphi = float(np.sum(1.0 / q**2) - np.sum(1.0 / p**2))
    return phi, dphi


def _extremum_in(xi: np.ndarray, left: float, right: float) -> float:
    """Zero of r' in (left, right) between two consecutive zeros of r.

    On such a bracket phi = r'/r runs from +inf to -inf and is strictly
    decreasing, so the zero is unique. A Newton step on phi is taken only when
    it stays inside the current bracket and is less than half the previous
    step; otherwise the bracket is bisected.
    """
    scan = np.linspace(left, right, _SCAN_POINTS + 2)[1:-1]
    lam = float(scan[np.argmax(r_abs(xi, scan))])
    lo, hi = left, right
    tol = _BRACKET_RTOL * right
    prev_step = hi - lo
    for _ in range(_NEWTON_MAXITER + _BISECT_MAXITER):
        phi, dphi = _logderiv(xi, lam)
        if phi == 0.0:
            break
        if phi > 0.0:
            lo = lam
        else:
            hi = lam
        newton = lam - phi / dphi
        if lo < newton < hi and abs(newton - lam) < 0.5 * prev_step:
            nxt = newton
        else:
            nxt = 0.5 * (lo + hi)
        prev_step = abs(nxt - lam)
        lam = nxt
        if prev_step <= tol or hi - lo <= tol:
            break
    return lam


def interior_extrema(poles) -> list[float]:
    """The k-1 local extrema of r_Xi, one strictly between each pair of adjacent zeros."""
    xi = np.sort(_pole_array(poles))[::-1]
    if xi.size < 2:
        raise ValueError("interior extrema need at least two poles")
    if np.any(np.diff(xi) >= 0.0):
        raise ValueError("poles must be pairwise distinct")
    zeros = -xi
    return [_extremum_in(xi, float(zeros[j]), float(zeros[j + 1])) for j in range(xi.size - 1)]


@dataclass(frozen=True)
class Certificate:
    """Delta = max |r_Xi| over the interval, with the points that were compared."""

    delta: float
    extrema: tuple[tuple[float, float], ...]
    interval: SpectralInterval
    endpoints: tuple[float, float] = field(default=(math.nan, math.nan))

    @property
    def argmax(self) -> float:
        cands = [(self.endpoints[0], self.interval.lo), (self.endpoints[1], self.interval.hi)]
        cands += [(v, loc) for loc, v in self.extrema]
        return max(cands, key=lambda c: (c[0], -c[1]))[1]


def certify(poles, interval: SpectralInterval) -> Certificate:
    """Sup-norm of r_Xi on [lambda_L, lambda_U] from the endpoints and interior extrema.

    Poles must lie in [-lambda_U, -lambda_L]. One and zero poles are handled
    from the endpoint values directly.
    """
    xi = _pole_array(poles)
    if np.unique(xi).size != xi.size:
        raise ValueError("poles must be pairwise distinct")
    if xi.size and (xi.min() < -interval.hi * (1 + _RANGE_RTOL) or xi.max() > -interval.lo * (1 - _RANGE_RTOL)):
        raise ValueError("poles must lie in [-lambda_U, -lambda_L]")
    ends = r_abs(xi, np.array([interval.lo, interval.hi]))
    extrema: tuple[tuple[float, float], ...] = ()
    if xi.size >= 2:
        locs = interior_extrema(xi)
        vals = r_abs(xi, np.array(locs))
        extrema = tuple((float(l), float(v)) for l, v in zip(locs, vals))
    delta = max([float(ends[0]), float(ends[1])] + [v for _, v in extrema])
    return Certificate(delta, extrema, interval, (float(ends[0]), float(ends[1])))


def _golden_max(fun, a: float, b: float, iters: int = 90) -> float:
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fun(c), fun(d)
    best = max(fc, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
        best = max(best, fc, fd)
        if b - a <= 1e-15 * b:
            break
    return best


def certify_bruteforce(poles, interval: SpectralInterval, gridpoints: int = 20000) -> float:
    """max |r_Xi| from a logarithmic grid refined by golden-section search.

    Every local maximum of the grid values gets its own refinement in the
    two neighbouring cells.
    """
    if gridpoints < 10_000:
        raise ValueError("use at least 10^4 grid points")
    xi = _pole_array(poles)
    if xi.size == 0:
        return 1.0
    grid = np.geomspace(interval.lo, interval.hi, gridpoints)
    vals = r_abs(xi, grid)
    best = float(vals.max())
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    for i in interior:
        best = max(best, _golden_max(lambda x: float(r_abs(xi, x)), grid[i - 1], grid[i + 1]))
    return best


def error_bound(
    f: ParametricFunction,
    poles,
    interval: SpectralInterval,
    k: int | None,
    norm_b: float,
    symmetric: bool = True,
    *,
    delta: float | None = None,
) -> float:
    """2 C c_k ||b|| Delta with C = 1 (symmetric) or the Crouzeix constant 11.08."""
    if delta is None:
        delta = certify(poles, interval).delta
    if k is None:
        k = _pole_array(poles).size
    if delta == 0.0:
        return 0.0
    c = 1.0 if symmetric else CROUZEIX
    ck = bound_constant(f, classify(f), interval, max(int(k), 1))
    return 2.0 * c * ck * float(norm_b) * float(delta)
