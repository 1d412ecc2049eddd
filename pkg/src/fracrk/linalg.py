"""Sparse and dense symmetric linear algebra.

The discretized operator is the pencil (A, M) with L = M^{-1} A. Everything
that needs an inner product uses the M-inner product <x, y>_M = x^T M y, in
which L is self-adjoint.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = [
    "DENSE_LIMIT",
    "KRYLOV_DEFLATION_TOL",
    "FactorizationError",
    "OperatorPair",
    "ShiftedCholesky",
    "solve_shifted",
    "solve_mass",
    "sym_generalized_eig",
    "dense_sym_eig",
    "m_norm",
    "mgs_m_orthonormalize",
    "read_operator",
    "write_operator",
]

DENSE_LIMIT = 4000
# Krylov bases keep directions down to this relative size: a nearly dependent
# resolvent image only adds a harmless direction to a Galerkin projection,
# while dropping it stalls convergence around 1e-11.
KRYLOV_DEFLATION_TOL = 1e-13


class FactorizationError(ArithmeticError):
    """Raised when a shifted operator is not positive definite."""


def _as_symmetric_csr(mat, name: str) -> sp.csr_matrix:
    m = sp.csr_matrix(mat, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    asym = abs(m - m.T)
    if asym.nnz and asym.max() > 0.0:
        raise ValueError(f"{name} is not symmetric")
    m.sort_indices()
    m.eliminate_zeros()
    return m


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Stiffness/mass pencil defining L = M^{-1} A.

    Parameters
    ----------
    A, M : sparse matrices
        Symmetric positive definite, same dimension. ``M=None`` means the
        identity mass used by finite-difference operators.
    name : str
        Label used in CSV output and diagnostics.
    exact_bounds : tuple of float, optional
        Analytic (lambda_min, lambda_max) when the generator knows them.
    """

    A: sp.csr_matrix
    M: sp.csr_matrix | None = None
    name: str = "custom"
    exact_bounds: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "A", _as_symmetric_csr(self.A, "A"))
        if self.M is None:
            object.__setattr__(self, "M", sp.identity(self.A.shape[0], format="csr"))
        else:
            object.__setattr__(self, "M", _as_symmetric_csr(self.M, "M"))
        if self.M.shape != self.A.shape:
            raise ValueError(f"A and M differ in shape: {self.A.shape} vs {self.M.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def identity_mass(self) -> bool:
        diff = self.M - sp.identity(self.n, format="csr")
        return diff.nnz == 0 or abs(diff).max() == 0.0

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return sym_generalized_eig(self)

    def apply_L(self, x: np.ndarray) -> np.ndarray:
        """Return M^{-1} A x."""
        return solve_mass(self, self.A @ x)

    def factor(self, shift: float) -> "ShiftedCholesky":
        """Cached Cholesky factorization of A - shift * M."""
        key = float(shift)
        with self._lock:
            fac = self._cache.get(key)
            if fac is None:
                fac = ShiftedCholesky(self.A - key * self.M)
                self._cache[key] = fac
        return fac

    @cached_property
    def _mass_factor(self) -> "ShiftedCholesky":
        return ShiftedCholesky(self.M)


class ShiftedCholesky:
    """Banded Cholesky factorization of a sparse SPD matrix.

    The matrix is reordered by reverse Cuthill-McKee so that the band is
    narrow for mesh operators; the factor is stored in LAPACK band format.
    """

    def __init__(self, mat: sp.spmatrix):
        mat = sp.csr_matrix(mat)
        self.n = mat.shape[0]
        self.perm = np.asarray(reverse_cuthill_mckee(mat, symmetric_mode=True), dtype=np.intp)
        pm = mat[self.perm][:, self.perm].tocoo()
        lower = pm.row >= pm.col
        rows, cols, vals = pm.row[lower], pm.col[lower], pm.data[lower]
        bw = int((rows - cols).max()) if rows.size else 0
        band = np.zeros((bw + 1, self.n))
        band[rows - cols, cols] = vals
        try:
            self.chol = scipy.linalg.cholesky_banded(band, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "shifted operator is not positive definite (pole inside the spectrum?)"
            ) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        out = np.empty_like(rhs)
        sol = scipy.linalg.cho_solve_banded((self.chol, True), rhs[self.perm], check_finite=False)
        out[self.perm] = sol
        return out


def solve_shifted(op: OperatorPair, shift: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (A - shift * M) x = rhs.

    Factorizations are cached per shift on ``op`` and reused across
    right-hand sides. Raises FactorizationError when the shifted matrix is
    not positive definite.
    """
    return op.factor(shift).solve(rhs)


def solve_mass(op: OperatorPair, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs."""
    if op.identity_mass:
        return np.array(rhs, dtype=float, copy=True)
    return op._mass_factor.solve(rhs)


def sym_generalized_eig(op: OperatorPair) -> tuple[np.ndarray, np.ndarray]:
    """Dense solution of A phi = lambda M phi.

    Returns ascending eigenvalues and M-orthonormal eigenvectors (columns).
    """
    if op.n > DENSE_LIMIT:
        raise ValueError(f"dense eigensolver limited to N <= {DENSE_LIMIT}, got {op.n}")
    a = op.A.toarray()
    if op.identity_mass:
        lam, phi = scipy.linalg.eigh(a)
    else:
        lam, phi = scipy.linalg.eigh(a, op.M.toarray())
    return lam, phi


def dense_sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a small dense symmetric matrix (ascending)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return np.linalg.eigh(0.5 * (m + m.T))


def m_norm(x: np.ndarray, M) -> float:
    return float(np.sqrt(max(float(x @ (M @ x)), 0.0)))


def mgs_m_orthonormalize(vectors, M, deflation_tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Modified Gram-Schmidt in the M-inner product with one reorthogonalization.

    Vectors whose M-norm after projection drops below ``deflation_tol`` times
    their original M-norm are discarded.

    Returns
    -------
    V : ndarray, shape (N, r)
        M-orthonormal columns spanning the retained vectors.
    r : int
        Number of retained columns.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if not vecs:
        raise ValueError("need at least one vector")
    n = vecs[0].shape[0]
    cols: list[np.ndarray] = []
    mcols: list[np.ndarray] = []
    for v in vecs:
        if v.shape != (n,):
            raise ValueError("all vectors must have the same length")
        w = v.copy()
        norm0 = m_norm(w, M)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q, mq in zip(cols, mcols):
                w -= (mq @ w) * q
        nrm = m_norm(w, M)
        if nrm <= deflation_tol * norm0:
            continue
        w /= nrm
        cols.append(w)
        mcols.append(M @ w)
    if not cols:
        raise ValueError("input vectors span the zero space")
    return np.column_stack(cols), len(cols)


def write_operator(op: OperatorPair, stem: str | Path) -> tuple[Path, Path]:
    """Write A and M as symmetric matrix-market files ``<stem>_A.mtx``, ``<stem>_M.mtx``."""
    stem = Path(stem)
    pa = stem.with_name(stem.name + "_A.mtx")
    pm = stem.with_name(stem.name + "_M.mtx")
    scipy.io.mmwrite(pa, op.A, symmetry="symmetric")
    scipy.io.mmwrite(pm, op.M, symmetry="symmetric")
    return pa, pm


def read_operator(path_a: str | Path, path_m: str | Path | None = None, name: str = "mtx") -> OperatorPair:
    a = scipy.io.mmread(path_a)
    m = None if path_m is None else scipy.io.mmread(path_m)
    return OperatorPair(sp.csr_matrix(a), None if m is None else sp.csr_matrix(m), name=name)
