"""Desk-scale Laplacian pencils and spectral interval estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import OperatorPair, m_norm, solve_shifted

__all__ = [
    "SpectralInterval",
    "fd_laplacian_2d",
    "fem_p1_1d",
    "fem_p1_2d",
    "spectral_bounds",
    "make_operator",
    "GENERATORS",
    "REFERENCE_INTERVAL",
]


@dataclass(frozen=True)
class SpectralInterval:
    """Interval [lo, hi] enclosing the spectrum of L.

    ``exact`` is True when the bounds come from an analytic eigenvalue
    formula rather than a numerical estimate. ``lo == hi`` is permitted so a
    single-point interval can drive the degenerate one-pole Zolotarev case.
    """

    lo: float
    hi: float
    exact: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not 0.0 < lo <= hi:
            raise ValueError(f"need 0 < lo <= hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def ratio(self) -> float:
        """delta = lo / hi."""
        return self.lo / self.hi

    def scaled(self, c: float) -> "SpectralInterval":
        return SpectralInterval(self.lo * c, self.hi * c, self.exact)

    def widened(self, safety: float) -> "SpectralInterval":
        if not safety >= 1.0:
            raise ValueError(f"safety factor must be >= 1, got {safety!r}")
        return SpectralInterval(self.lo / safety, self.hi * safety, self.exact)

    def logspace(self, num: int) -> np.ndarray:
        return np.geomspace(self.lo, self.hi, num)


# interval used for the pole and certificate studies that need no operator
REFERENCE_INTERVAL = SpectralInterval(19.0, 348475.0)


def _tridiag(n: int, lower: float, diag: float, upper: float) -> sp.csr_matrix:
    return sp.diags(
        [np.full(n - 1, lower), np.full(n, diag), np.full(n - 1, upper)], [-1, 0, 1], format="csr"
    )


def fd_laplacian_2d(n: int) -> OperatorPair:
    """Five-point Dirichlet Laplacian on the unit square, identity mass.

    ``n`` interior nodes per side, h = 1/(n+1), N = n**2 unknowns.
    """
    if n < 2:
        raise ValueError(f"fd_laplacian_2d needs n >= 2, got {n}")
    h = 1.0 / (n + 1)
    t = _tridiag(n, -1.0, 2.0, -1.0)
    eye = sp.identity(n, format="csr")
    a = (sp.kron(t, eye) + sp.kron(eye, t)) / h**2
    lo = 8.0 / h**2 * math.sin(0.5 * math.pi * h) ** 2
    hi = 8.0 / h**2 * math.sin(0.5 * n * math.pi * h) ** 2
    return OperatorPair(a.tocsr(), None, name=f"fd2d-{n}", exact_bounds=(lo, hi))


def fem_p1_1d(n: int) -> OperatorPair:
    """P1 finite elements on (0, 1) with ``n`` interior nodes."""
    if n < 1:
        raise ValueError(f"fem_p1_1d needs n >= 1, got {n}")
    h = 1.0 / (n + 1)
    a = _tridiag(n, -1.0, 2.0, -1.0) / h
    m = _tridiag(n, 1.0, 4.0, 1.0) * (h / 6.0)

    def pencil_eig(k: int) -> float:
        c = math.cos(k * math.pi * h)
        return 6.0 / h**2 * (1.0 - c) / (2.0 + c)

    return OperatorPair(a, m, name=f"fem1d-{n}", exact_bounds=(pencil_eig(1), pencil_eig(n)))


def fem_p1_2d(n: int) -> OperatorPair:
    """P1 finite elements on the unit square, Friedrichs-Keller triangulation.

    ``n`` interior nodes per side (h = 1/(n+1)); every mesh square is cut
    along its lower-left to upper-right diagonal. Dirichlet nodes are
    eliminated, leaving N = n**2 unknowns.
    """
    if n < 2:
        raise ValueError(f"fem_p1_2d needs n >= 2, got {n}")
    h = 1.0 / (n + 1)
    nv = n + 2
    idx = np.arange(nv * nv).reshape(nv, nv)  # idx[i, j]: x = i h, y = j h
    i, j = np.meshgrid(np.arange(nv - 1), np.arange(nv - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    p00, p10, p01, p11 = idx[i, j], idx[i + 1, j], idx[i, j + 1], idx[i + 1, j + 1]
    # both triangles list the right-angle vertex first
    tris = np.concatenate([np.stack([p10, p00, p11], 1), np.stack([p01, p11, p00], 1)])

    # reference right triangle with legs h: the stiffness is independent of h
    ke = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    me = (h * h / 24.0) * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    ntot = nv * nv
    a_full = sp.coo_matrix((np.tile(ke.ravel(), len(tris)), (rows, cols)), shape=(ntot, ntot)).tocsr()
    m_full = sp.coo_matrix((np.tile(me.ravel(), len(tris)), (rows, cols)), shape=(ntot, ntot)).tocsr()

    interior = idx[1:-1, 1:-1].ravel()
    a = a_full[interior][:, interior]
    m = m_full[interior][:, interior]
    # assembled sums can differ from their transposes in the last bit
    a = 0.5 * (a + a.T)
    m = 0.5 * (m + m.T)
    return OperatorPair(a.tocsr(), m.tocsr(), name=f"fem2d-{n}")


GENERATORS = {"fd2d": fd_laplacian_2d, "fem1d": fem_p1_1d, "fem2d": fem_p1_2d}


def make_operator(kind: str, size: int) -> OperatorPair:
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown operator {kind!r}; choose from {sorted(GENERATORS)}") from None
    return gen(int(size))


def _lanczos_max(apply, M, v0: np.ndarray, maxiter: int) -> tuple[float, bool]:
    """Largest Ritz value of an M-self-adjoint operator.

    Full reorthogonalization in the M-inner product. Returns the estimate
    and whether the iteration broke down before exhausting the space.
    """
    n = v0.shape[0]
    q = v0 / m_norm(v0, M)
    basis = [q]
    mbasis = [M @ q]
    alphas, betas = [], []
    broke = False
    for _ in range(min(maxiter, n)):
        w = apply(basis[-1])
        alphas.append(float(mbasis[-1] @ w))
        for _ in range(2):
            for qq, mq in zip(basis, mbasis):
                w -= (mq @ w) * qq
        beta = m_norm(w, M)
        if len(basis) == n:
            break
        if beta <= 1e-12 * max(abs(alphas[-1]), 1e-300):
            broke = True
            break
        betas.append(beta)
        q = w / beta
        basis.append(q)
        mbasis.append(M @ q)
    m = len(alphas)
    t = np.diag(alphas) + np.diag(betas[: m - 1], 1) + np.diag(betas[: m - 1], -1)
    return float(np.linalg.eigvalsh(t)[-1]), broke


def _gershgorin_hi(op: OperatorPair) -> float:
    a = abs(op.A)
    row_a = np.asarray(a.sum(axis=1)).ravel()
    if op.identity_mass:
        return float(row_a.max())
    m = op.M
    diag = m.diagonal()
    off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
    low_m = float((diag - off).min())
    if low_m <= 0.0:
        raise ArithmeticError("Gershgorin fallback needs a diagonally dominant mass matrix")
    return float(row_a.max()) / low_m


def _inverse_iteration_lo(op: OperatorPair, v0: np.ndarray, steps: int = 30) -> float:
    v = v0 / m_norm(v0, op.M)
    for _ in range(steps):
        v = solve_shifted(op, 0.0, op.M @ v)
        v /= m_norm(v, op.M)
    return float(v @ (op.A @ v))


def spectral_bounds(
    op: OperatorPair, safety: float = 1.0, *, maxiter: int = 60, seed: int = 0, use_exact: bool = True
) -> SpectralInterval:
    """Interval [lambda_min / safety, lambda_max * safety].

    Analytic values are used when the generator provides them (and
    ``use_exact``); otherwise both ends are Lanczos estimates, the lower one
    obtained from the largest eigenvalue of L^{-1}.
    """
    if not safety >= 1.0:
        raise ValueError(f"safety factor must be >= 1, got {safety!r}")
    if use_exact and op.exact_bounds is not None:
        lo, hi = op.exact_bounds
        return SpectralInterval(lo / safety, hi * safety, exact=True)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(op.n)
    hi, broke_hi = _lanczos_max(op.apply_L, op.M, v0, maxiter)
    inv_max, broke_lo = _lanczos_max(lambda x: solve_shifted(op, 0.0, op.M @ x), op.M, v0, maxiter)
    lo = 1.0 / inv_max
    if broke_hi:
        hi = _gershgorin_hi(op)
    if broke_lo:
        lo = _inverse_iteration_lo(op, v0)
    return SpectralInterval(lo / safety, hi * safety, exact=False)
