"""Pole selection strategies.

All poles are negative reals. Strategy tags:

Z  Zolotarev poles (optimal, not nested)
E  equidistributed-sequence poles (nested, asymptotically optimal)
G  weak greedy on the resolvent residual
S  spectral adaptive (poles and Ritz values)
A  greedy on the certificate, given spectral bounds
F  greedy on the certificate, spectral bounds taken from Ritz values
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certificate import interior_extrema, r_abs
from .discretize import SpectralInterval
from .linalg import KRYLOV_DEFLATION_TOL, OperatorPair, dense_sym_eig, mgs_m_orthonormalize, solve_mass, solve_shifted
from .specfun import ellip_k_complement, jacobi_dn

__all__ = [
    "STRATEGIES",
    "PoleSet",
    "zolotarev",
    "zolotarev_rate",
    "zolotarev_rate_asymptotic",
    "eds_sequence",
    "eds_g",
    "eds",
    "training_grid",
    "weak_greedy",
    "spectral_adaptive",
    "auto_poles",
    "fully_auto_poles",
    "make_poles",
    "save_poles",
    "load_poles",
]

STRATEGIES = ("Z", "E", "G", "S", "A", "F")
_RANGE_RTOL = 1e-12


@dataclass(frozen=True)
class PoleSet:
    """Distinct negative poles.

    ``sequence`` keeps the order of generation, so that nested strategies
    can be truncated with :meth:`prefix`; ``poles`` is the same set sorted
    decreasingly (xi_1 > xi_2 > ... > xi_k).
    """

    sequence: tuple[float, ...]
    strategy: str
    interval: SpectralInterval | None = None

    def __post_init__(self):
        seq = tuple(float(x) for x in self.sequence)
        object.__setattr__(self, "sequence", seq)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if any(not (x < 0.0 and math.isfinite(x)) for x in seq):
            raise ValueError("poles must be finite negative reals")
        if len(set(seq)) != len(seq):
            raise ValueError("poles must be pairwise distinct")
        if self.interval is not None and seq:
            lo, hi = self.interval.lo, self.interval.hi
            if min(seq) < -hi * (1 + _RANGE_RTOL) or max(seq) > -lo * (1 - _RANGE_RTOL):
                raise ValueError(f"poles must lie in [-{hi:g}, -{lo:g}]")

    @property
    def poles(self) -> tuple[float, ...]:
        return tuple(sorted(self.sequence, reverse=True))

    @property
    def k(self) -> int:
        return len(self.sequence)

    def __len__(self) -> int:
        return len(self.sequence)

    def array(self) -> np.ndarray:
        return np.array(self.poles)

    def prefix(self, k: int) -> "PoleSet":
        if not 0 <= k <= self.k:
            raise ValueError(f"prefix length {k} out of range 0..{self.k}")
        return PoleSet(self.sequence[:k], self.strategy, self.interval)


def _interval(interval) -> SpectralInterval:
    if isinstance(interval, SpectralInterval):
        return interval
    lo, hi = interval
    return SpectralInterval(lo, hi)


# ---------------------------------------------------------------- Zolotarev


def zolotarev(interval, k: int) -> PoleSet:
    """Zolotarev poles -b dn((2(k-j)+1)/(2k) K(d'), d'), d' = sqrt(1 - (a/b)^2)."""
    iv = _interval(interval)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if iv.degenerate:
        if k > 1:
            raise ValueError("a single-point interval admits only one distinct pole")
        return PoleSet((-iv.hi,) * k, "Z", iv)
    delta = iv.ratio
    kp = math.sqrt((1.0 - delta) * (1.0 + delta))
    big_k = ellip_k_complement(delta)
    poles = []
    for j in range(1, k + 1):
        num = 2 * (k - j) + 1
        if num <= k:
            poles.append(-iv.hi * jacobi_dn(num / (2.0 * k) * big_k, kp, complement=delta))
        else:
            # dn(K - w) = d'/dn(w): the reflected argument is formed exactly
            w = (2 * j - 1) / (2.0 * k) * big_k
            poles.append(-iv.lo / jacobi_dn(w, kp, complement=delta))
    return PoleSet(tuple(poles), "Z", iv)


def zolotarev_rate(interval) -> float:
    """C* = pi K(mu_1) / (4 K(mu)), mu = ((1 - sqrt d)/(1 + sqrt d))^2, mu_1 = sqrt(1 - mu^2)."""
    iv = _interval(interval)
    if iv.degenerate:
        return math.inf
    sd = math.sqrt(iv.ratio)
    mu = ((1.0 - sd) / (1.0 + sd)) ** 2
    one_minus_mu = 4.0 * sd / (1.0 + sd) ** 2
    mu1 = math.sqrt(one_minus_mu * (1.0 + mu))
    if mu == 0.0:
        return math.inf
    # K(mu_1) has complement mu and K(mu) has complement mu_1
    return math.pi * ellip_k_complement(mu) / (4.0 * ellip_k_complement(mu1))


def zolotarev_rate_asymptotic(interval) -> float:
    """Small-ratio approximation pi^2 / (2 ln(4 / d))."""
    iv = _interval(interval)
    return math.pi**2 / (2.0 * math.log(4.0 / iv.ratio))


# ---------------------------------------------------------------------- EDS

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _gauss(fun, a: float, b: float, panels: int = 1) -> float:
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        x = lo + half * (_GL_NODES + 1.0)
        total += half * float(_GL_WEIGHTS @ fun(x))
    return total


def eds_sequence(k: int) -> np.ndarray:
    """s_j = frac(j sqrt 2), j = 1..k."""
    j = np.arange(1, k + 1, dtype=float)
    v = j * math.sqrt(2.0)
    return v - np.floor(v)


class _EDSMap:
    """g(t) = (1/2M) int_{d^2}^t dy / sqrt((y - d^2) y (1 - y)) and its inverse."""

    def __init__(self, delta: float):
        self.d2 = delta * delta
        self.M = ellip_k_complement(delta)
        self.mid = 0.5 * (self.d2 + 1.0)

    def _left(self, t: float) -> float:
        # y = d^2 cosh^2 u removes the endpoint singularity and the narrow
        # peak of 1/sqrt(y) near y = d^2; the integrand becomes 2/sqrt(1 - y)
        if t <= self.d2:
            return 0.0
        d = math.sqrt(self.d2)
        upper = math.acosh(math.sqrt(t) / d)
        return _gauss(lambda u: 2.0 / np.sqrt(1.0 - (d * np.cosh(u)) ** 2), 0.0, upper, panels=4)

    def _right(self, lo: float, t: float) -> float:
        # 1 - y = w^2 removes the singularity at y = 1
        w_lo, w_hi = math.sqrt(1.0 - t), math.sqrt(1.0 - lo)

        def integrand(w):
            y = 1.0 - w * w
            return 2.0 / np.sqrt(y * (y - self.d2))

        return _gauss(integrand, w_lo, w_hi, panels=2)

    def integral(self, t: float) -> float:
        t = min(max(t, self.d2), 1.0)
        if t <= self.mid:
            return self._left(t)
        return self._left(self.mid) + self._right(self.mid, t)

    def g(self, t: float) -> float:
        return self.integral(t) / (2.0 * self.M)

    def dg(self, t: float) -> float:
        return 1.0 / (2.0 * self.M * math.sqrt((t - self.d2) * t * (1.0 - t)))

    def solve(self, s: float) -> float:
        """Root of g(t) = s in (d^2, 1) by Newton safeguarded with bisection."""
        lo, hi = self.d2, 1.0
        t = self.d2 + s * (1.0 - self.d2)
        for _ in range(200):
            res = self.g(t) - s
            if res == 0.0:
                return t
            if res > 0.0:
                hi = t
            else:
                lo = t
            step = res / self.dg(t)
            nxt = t - step
            if not lo < nxt < hi:
                nxt = 0.5 * (lo + hi)
            if abs(nxt - t) <= 4e-16 * t or hi - lo <= 4e-16 * hi:
                return nxt
            t = nxt
        raise ArithmeticError(f"EDS root for s={s} did not converge")


def eds_g(interval, t: float) -> float:
    """The map g for the interval, exposed for checking."""
    return _EDSMap(_interval(interval).ratio).g(t)


def eds(interval, k: int) -> PoleSet:
    """Nested poles -lambda_U sqrt(t_j) with g(t_j) = frac(j sqrt 2)."""
    iv = _interval(interval)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if iv.degenerate:
        raise ValueError("EDS poles need lo < hi")
    emap = _EDSMap(iv.ratio)
    lo_pole, hi_pole = -iv.hi, -iv.lo
    poles = []
    for s in eds_sequence(k):
        xi = -iv.hi * math.sqrt(emap.solve(float(s)))
        poles.append(min(max(xi, lo_pole), hi_pole))
    return PoleSet(tuple(poles), "E", iv)


# ------------------------------------------------------ operator-based poles


def training_grid(interval, k: int, size: int | None = None) -> np.ndarray:
    iv = _interval(interval)
    n = 100 * max(k, 1) if size is None else int(size)
    if n < 10 * k:
        raise ValueError(f"training grid needs at least 10k = {10 * k} points, got {n}")
    return iv.logspace(n)


def _first_argmax(values: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the smallest grid point
    return int(np.argmax(values))


def _m_basis(op: OperatorPair, vectors) -> np.ndarray:
    return mgs_m_orthonormalize(vectors, op.M, KRYLOV_DEFLATION_TOL)[0]


def _ritz(op: OperatorPair, V: np.ndarray) -> np.ndarray:
    return dense_sym_eig(V.T @ (op.A @ V))[0]


def weak_greedy(
    op: OperatorPair,
    b: np.ndarray,
    interval,
    k: int,
    training: np.ndarray | None = None,
    *,
    estimator: str = "residual",
    tol: float = 1e-13,
) -> PoleSet:
    """Greedy poles maximizing a resolvent error estimator over a training grid.

    ``estimator="residual"`` measures ||(zeta M + A) V y - M b||_{M^-1}
    with y = (zeta I + L_r)^{-1} V^T M b, i.e. the M-norm of
    zeta V y + M^{-1} A V y - b. ``estimator="printed"`` uses
    ||b - V y||_M instead. Selection stops early once the estimator falls
    below ``tol`` ||b||_M on the whole grid.
    """
    if estimator not in ("residual", "printed"):
        raise ValueError(f"unknown estimator {estimator!r}")
    iv = _interval(interval)
    grid = training_grid(iv, k) if training is None else np.asarray(training, dtype=float)
    b = np.asarray(b, dtype=float)
    mb = op.M @ b
    nb = math.sqrt(float(b @ mb))
    if nb == 0.0:
        raise ValueError("b must be nonzero")
    vectors = [b]
    poles: list[float] = []
    for _ in range(k):
        V = _m_basis(op, vectors)
        AV = op.A @ V
        theta, phi = dense_sym_eig(V.T @ AV)
        c = phi.T @ (V.T @ mb)
        Y = phi @ (c[:, None] / (grid[None, :] + theta[:, None]))
        VY = V @ Y
        if estimator == "residual":
            W = solve_mass(op, AV)
            R = VY * grid[None, :] + W @ Y - b[:, None]
        else:
            R = b[:, None] - VY
        est = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, op.M @ R), 0.0))
        if est.max() <= tol * nb:
            break
        zeta = float(grid[_first_argmax(est)])
        if -zeta in poles:
            break
        poles.append(-zeta)
        vectors.append(solve_shifted(op, -zeta, mb))
    return PoleSet(tuple(poles), "G", iv)


def spectral_adaptive(
    op: OperatorPair, b: np.ndarray, interval, k: int, training: np.ndarray | None = None
) -> PoleSet:
    """Poles maximizing prod |lambda + xi_j| / (lambda + mu_j) over the grid.

    mu_j are the Ritz values of L on span{(A - xi_j M)^{-1} M b}; the first
    pole is -lambda_L.
    """
    iv = _interval(interval)
    grid = training_grid(iv, k) if training is None else np.asarray(training, dtype=float)
    b = np.asarray(b, dtype=float)
    mb = op.M @ b
    if not np.any(b):
        raise ValueError("b must be nonzero")
    if k == 0:
        return PoleSet((), "S", iv)
    poles = [-iv.lo]
    vectors = [solve_shifted(op, poles[0], mb)]
    while len(poles) < k:
        mu = _ritz(op, _m_basis(op, vectors))
        xi = np.array(poles)
        with np.errstate(divide="ignore"):
            obj = np.log(np.abs(grid[:, None] + xi[None, :])).sum(axis=1)
        obj -= np.log(grid[:, None] + mu[None, :]).sum(axis=1)
        lam = float(grid[_first_argmax(obj)])
        if -lam in poles:
            break
        poles.append(-lam)
        vectors.append(solve_shifted(op, -lam, mb))
    return PoleSet(tuple(poles), "S", iv)


def _greedy_step(poles: list[float], candidates: list[float]) -> float:
    """Candidate with the largest |r|, smallest location on ties."""
    cands = np.array(sorted(candidates))
    vals = r_abs(np.array(poles), cands)
    return float(cands[_first_argmax(vals)])


def auto_poles(interval, k: int) -> PoleSet:
    """Greedy minimization of the certificate, started from {-lambda_L, -lambda_U}."""
    iv = _interval(interval)
    if k < 2:
        raise ValueError(f"automatic pole selection needs k >= 2, got {k}")
    if iv.degenerate:
        raise ValueError("automatic pole selection needs lo < hi")
    poles = [-iv.lo, -iv.hi]
    while len(poles) < k:
        lam = _greedy_step(poles, interior_extrema(poles))
        poles.append(-lam)
    return PoleSet(tuple(poles), "A", iv)


class KrylovBreakdown(ArithmeticError):
    """The starting Krylov space is degenerate (b is an eigenvector)."""


def fully_auto_poles(op: OperatorPair, b: np.ndarray, k: int) -> PoleSet:
    """Greedy certificate minimization on the hull of the extremal Ritz values."""
    if k < 2:
        raise ValueError(f"fully automatic pole selection needs k >= 2, got {k}")
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        raise ValueError("b must be nonzero")
    mb = op.M @ b
    V, r = mgs_m_orthonormalize([b, op.apply_L(b)], op.M, KRYLOV_DEFLATION_TOL)
    if r < 2:
        raise KrylovBreakdown("span{b, Lb} is one-dimensional; b is an eigenvector of L")
    mu = _ritz(op, V)
    poles = [-float(mu[0]), -float(mu[1])]
    vectors = [b] + [solve_shifted(op, p, mb) for p in poles]
    while len(poles) < k:
        mu = _ritz(op, _m_basis(op, vectors))
        lo, hi = float(mu[0]), float(mu[-1])
        cands = [x for x in interior_extrema(poles) if lo <= x <= hi] + [lo, hi]
        lam = _greedy_step(poles, cands)
        if -lam in poles:
            break
        poles.append(-lam)
        vectors.append(solve_shifted(op, -lam, mb))
    return PoleSet(tuple(poles), "F", None)


def make_poles(
    strategy: str,
    k: int,
    interval=None,
    op: OperatorPair | None = None,
    b: np.ndarray | None = None,
) -> PoleSet:
    """Dispatch on the strategy tag."""
    if strategy in ("G", "S", "F") and (op is None or b is None):
        raise ValueError(f"strategy {strategy} needs an operator and a vector")
    if strategy != "F" and interval is None:
        raise ValueError(f"strategy {strategy} needs a spectral interval")
    if strategy == "Z":
        return zolotarev(interval, k)
    if strategy == "E":
        return eds(interval, k)
    if strategy == "G":
        return weak_greedy(op, b, interval, k)
    if strategy == "S":
        return spectral_adaptive(op, b, interval, k)
    if strategy == "A":
        return auto_poles(interval, k)
    if strategy == "F":
        return fully_auto_poles(op, b, k)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def save_poles(poles: PoleSet, path: str | Path) -> None:
    """One pole per line in generation order, after a comment header."""
    lines = [f"# strategy={poles.strategy}"]
    if poles.interval is not None:
        lines.append(f"# interval={poles.interval.lo!r},{poles.interval.hi!r}")
    lines += [repr(x) for x in poles.sequence]
    Path(path).write_text("\n".join(lines) + "\n")


def load_poles(path: str | Path) -> PoleSet:
    strategy, interval, values = "Z", None, []
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key == "strategy":
                strategy = val.strip()
            elif key == "interval":
                lo, hi = (float(v) for v in val.split(","))
                interval = SpectralInterval(lo, hi)
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{n}: not a number: {line!r}") from None
    return PoleSet(tuple(values), strategy, interval)
