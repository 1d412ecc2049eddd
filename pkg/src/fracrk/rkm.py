"""Rational Krylov approximation u = V f(L_r) V^T M b and the FODE solution formula."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .functions import ML, ParametricFunction, PowNeg, PowPos, evaluate
from .linalg import KRYLOV_DEFLATION_TOL, OperatorPair, dense_sym_eig, m_norm, mgs_m_orthonormalize, solve_shifted
from .poles import PoleSet

__all__ = [
    "KrylovBasis",
    "build_basis",
    "apply_f",
    "ritz_values",
    "exact_apply",
    "rkm_error",
    "solve_fode",
    "MAX_FORCING_DEGREE",
]

MAX_FORCING_DEGREE = 6

ScalarFunction = Union[ParametricFunction, Callable[[np.ndarray], np.ndarray]]


def _values(f: ScalarFunction, lam: np.ndarray) -> np.ndarray:
    if isinstance(f, (PowPos, PowNeg, ML)):
        return np.asarray(evaluate(f, lam), dtype=float)
    out = np.asarray(f(lam), dtype=float)
    if out.shape != lam.shape:
        raise ValueError("function must map an array of eigenvalues to an array of the same shape")
    return out


def _pole_sequence(poles) -> tuple[float, ...]:
    if isinstance(poles, PoleSet):
        return poles.sequence
    seq = tuple(float(x) for x in np.asarray(poles, dtype=float).ravel())
    if any(not (x < 0.0 and math.isfinite(x)) for x in seq):
        raise ValueError("poles must be finite negative reals")
    if len(set(seq)) != len(seq):
        raise ValueError("poles must be pairwise distinct")
    return seq


@dataclass(frozen=True, eq=False)
class KrylovBasis:
    """M-orthonormal basis of span{b, (A - xi_j M)^{-1} M b} and L_r = V^T A V.

    ``deflated`` is True when some resolvent image was (numerically) already
    in the span, so that ``V`` has fewer than k + 1 columns.
    """

    V: np.ndarray
    reduced: np.ndarray
    poles: tuple[float, ...]
    op: OperatorPair = field(repr=False)
    b: np.ndarray = field(repr=False)
    deflated: bool = False

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    @property
    def k(self) -> int:
        return len(self.poles)

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_eig")
        if cached is None:
            cached = dense_sym_eig(self.reduced)
            object.__setattr__(self, "_eig", cached)
        return cached


def build_basis(op: OperatorPair, b: np.ndarray, poles) -> KrylovBasis:
    """Rational Krylov basis for the pole sequence (generation order is kept)."""
    b = np.asarray(b, dtype=float)
    if b.shape != (op.n,):
        raise ValueError(f"b must have length {op.n}, got shape {b.shape}")
    if not np.any(b):
        raise ValueError("b must be nonzero")
    seq = _pole_sequence(poles)
    mb = op.M @ b
    vectors = [b] + [solve_shifted(op, xi, mb) for xi in seq]
    V, r = mgs_m_orthonormalize(vectors, op.M, KRYLOV_DEFLATION_TOL)
    reduced = V.T @ (op.A @ V)
    reduced = 0.5 * (reduced + reduced.T)
    return KrylovBasis(V, reduced, seq, op, b, deflated=r < len(vectors))


def ritz_values(basis: KrylovBasis) -> np.ndarray:
    """Eigenvalues of the reduced operator, ascending."""
    return basis.eig()[0]


def apply_f(basis: KrylovBasis, f: ScalarFunction, b: np.ndarray | None = None) -> np.ndarray:
    """u = V Phi diag(f(theta)) Phi^T V^T M b.

    ``f`` is a parametric function or any vectorized callable. ``b``
    defaults to the starting vector of the basis.
    """
    b = basis.b if b is None else np.asarray(b, dtype=float)
    theta, phi = basis.eig()
    if np.any(theta <= 0.0):
        raise ValueError("reduced operator has a non-positive Ritz value")
    fv = _values(f, theta)
    if not np.all(np.isfinite(fv)):
        raise ValueError("f is not finite at some Ritz value")
    c = phi.T @ (basis.V.T @ (basis.op.M @ b))
    return basis.V @ (phi @ (fv * c))


def exact_apply(op: OperatorPair, f: ScalarFunction, b: np.ndarray) -> np.ndarray:
    """f(L) b = Phi diag(f(lambda)) Phi^T M b from the dense generalized eigendecomposition."""
    lam, phi = op.eig
    fv = _values(f, lam)
    return phi @ (fv * (phi.T @ (op.M @ np.asarray(b, dtype=float))))


def rkm_error(
    op: OperatorPair,
    f: ScalarFunction,
    poles,
    b: np.ndarray,
    k: int | None = None,
    *,
    basis: KrylovBasis | None = None,
    exact: np.ndarray | None = None,
) -> float:
    """E = ||f(L) b - u||_M for the first ``k`` poles (all when ``k`` is None).

    A prebuilt ``basis`` and a precomputed ``exact`` vector can be passed to
    share work across parameter sweeps.
    """
    if basis is None:
        seq = _pole_sequence(poles)
        if k is not None:
            if not 0 <= k <= len(seq):
                raise ValueError(f"k must lie in [0, {len(seq)}], got {k}")
            seq = seq[:k]
        basis = build_basis(op, b, seq)
    if exact is None:
        exact = exact_apply(op, f, b)
    return m_norm(exact - apply_f(basis, f, b), op.M)


def solve_fode(
    op: OperatorPair,
    u0: np.ndarray,
    forcing: Sequence[tuple[int, np.ndarray]],
    alpha: float,
    s: float,
    t: float,
    *,
    mode: str = "exact",
    poles=None,
) -> np.ndarray:
    """Solution of the fractional evolution problem with polynomial forcing.

    u(t) = E_{a,1}(-t^a L^s) u0 + sum_k k! t^(a+k) E_{a,a+k+1}(-t^a L^s) v_k
    for forcing f(t) = sum_k t^k v_k, given as (degree, v_k) pairs.

    ``mode="exact"`` applies every Mittag-Leffler term through the
    eigendecomposition, ``mode="rkm"`` through a rational Krylov basis
    built on each vector with ``poles``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s!r}")
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError(f"t must be finite and >= 0, got {t!r}")
    if mode not in ("exact", "rkm"):
        raise ValueError(f"mode must be 'exact' or 'rkm', got {mode!r}")
    if mode == "rkm" and poles is None:
        raise ValueError("rkm mode needs a pole set")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (op.n,):
        raise ValueError(f"u0 must have length {op.n}, got shape {u0.shape}")
    terms = []
    for degree, v in forcing:
        degree = int(degree)
        if not 0 <= degree <= MAX_FORCING_DEGREE:
            raise ValueError(f"forcing degree must lie in [0, {MAX_FORCING_DEGREE}], got {degree}")
        v = np.asarray(v, dtype=float)
        if v.shape != (op.n,):
            raise ValueError(f"forcing vector of degree {degree} must have length {op.n}")
        terms.append((degree, v))
    if t == 0.0:
        return u0.copy()

    def act(f: ML, vec: np.ndarray) -> np.ndarray:
        if not np.any(vec):
            return np.zeros_like(vec)
        if mode == "exact":
            return exact_apply(op, f, vec)
        return apply_f(build_basis(op, vec, poles), f, vec)

    u = act(ML(alpha, 1.0, t, s), u0)
    for degree, v in terms:
        coef = math.factorial(degree) * t ** (alpha + degree)
        u = u + coef * act(ML(alpha, alpha + degree + 1.0, t, s), v)
    return u
