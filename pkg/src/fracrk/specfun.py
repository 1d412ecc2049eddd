"""Scalar special functions: elliptic integrals, Jacobi dn, gamma and the
Mittag-Leffler function on the negative real axis."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "MLParams",
    "ellip_k",
    "ellip_k_complement",
    "jacobi_sn_cn_dn",
    "jacobi_dn",
    "gamma_fn",
    "mittag_leffler_neg",
]

_AGM_TOL = 2.0**-52
_AGM_MAXITER = 40


def _agm(a: float, b: float) -> float:
    for _ in range(_AGM_MAXITER):
        if abs(a - b) <= _AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def ellip_k(modulus: float) -> float:
    """Complete elliptic integral of the first kind K(k).

    The argument is the modulus k (not the parameter m = k**2).
    """
    k = float(modulus)
    if not 0.0 <= k < 1.0:
        raise ValueError(f"ellip_k requires 0 <= modulus < 1, got {modulus!r}")
    return ellip_k_complement(math.sqrt((1.0 - k) * (1.0 + k)))


def ellip_k_complement(complement: float) -> float:
    """K evaluated from the complementary modulus k' = sqrt(1 - k**2).

    Use this when k' is known more accurately than k (k close to 1).
    """
    kp = float(complement)
    if not 0.0 < kp <= 1.0:
        raise ValueError(f"complementary modulus must lie in (0, 1], got {complement!r}")
    return math.pi / (2.0 * _agm(1.0, kp))


_LANDEN_STOP = 1e-9


def _landen_chain(k: float, kp: float) -> list[tuple[float, float]]:
    """Descending Landen moduli as (k_i, 1 - k_i) pairs, i = 1..n.

    k_i = (1 - k'_{i-1}) / (1 + k'_{i-1}) and k'_i = 2 sqrt(k'_{i-1}) / (1 + k'_{i-1});
    the complement is carried along so that nothing is formed as 1 - (near 1).
    The chain stops once k_n**2 is below double precision.
    """
    chain = []
    while k > _LANDEN_STOP:
        if len(chain) > _AGM_MAXITER:
            raise ArithmeticError("Landen sequence failed to converge")
        k, one_minus_k, kp = (1.0 - kp) / (1.0 + kp), 2.0 * kp / (1.0 + kp), 2.0 * math.sqrt(kp) / (1.0 + kp)
        chain.append((k, one_minus_k))
    return chain


def _landen_eval(v: np.ndarray, chain, k_bottom: float):
    """sn, cn, dn on 0 <= v <= K/2 by the descending Landen recurrence.

    Going up one level with v = (1 + k_i) w:
    sn = (1 + k_i) s / (1 + k_i s^2), cn = c d / (1 + k_i s^2),
    dn = ((1 - k_i) + k_i c^2) / (1 + k_i s^2),
    where (s, c, d) are the functions of w at modulus k_i. All terms are
    positive on the reduced range, so no cancellation occurs.
    """
    args = [v]
    for ki, _ in chain:
        args.append(args[-1] / (1.0 + ki))
    w = args[-1]
    s, c = np.sin(w), np.cos(w)
    d = np.sqrt(1.0 - (k_bottom * s) ** 2)
    for ki, one_minus_ki in reversed(chain):
        den = 1.0 + ki * s * s
        s, c, d = (1.0 + ki) * s / den, c * d / den, (one_minus_ki + ki * c * c) / den
    return s, c, d


def jacobi_sn_cn_dn(u, modulus: float, complement: float | None = None):
    """Jacobi elliptic functions sn, cn, dn by descending Landen transformation.

    ``u`` may be a scalar or an array. ``complement`` optionally supplies
    k' directly, which keeps the functions accurate when k is within
    rounding of 1.
    """
    k = float(modulus)
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"jacobi functions require 0 <= modulus <= 1, got {modulus!r}")
    u = np.asarray(u, dtype=float)
    if complement is None:
        kp = math.sqrt((1.0 - k) * (1.0 + k))
    else:
        kp = float(complement)
        if not 0.0 <= kp <= 1.0:
            raise ValueError(f"complementary modulus must lie in [0, 1], got {complement!r}")

    if k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    if kp == 0.0:
        sech = 1.0 / np.cosh(u)
        return np.tanh(u), sech, sech

    chain = _landen_chain(k, kp)
    k_bottom = chain[-1][0] if chain else k
    quarter = 0.5 * math.pi
    for ki, _ in chain:
        quarter *= 1.0 + ki

    # reduce to w in [0, K]: sn is odd with period 4K and sn(2K - u) = sn(u);
    # cn is even with period 4K and cn(2K - u) = -cn(u); dn is even with period 2K
    x = np.mod(u, 4.0 * quarter)
    sn_sign = np.where(x > 2.0 * quarter, -1.0, 1.0)
    x = np.where(x > 2.0 * quarter, x - 2.0 * quarter, x)
    cn_sign = np.where(x > quarter, -1.0, 1.0) * sn_sign
    w = np.where(x > quarter, 2.0 * quarter - x, x)
    w = np.clip(w, 0.0, quarter)

    # on [K/2, K] use sn(K - z) = cn(z)/dn(z), cn(K - z) = k' sn(z)/dn(z), dn(K - z) = k'/dn(z)
    near = w <= 0.5 * quarter
    z = np.where(near, w, quarter - w)
    s, c, d = _landen_eval(z, chain, k_bottom)
    sn = np.where(near, s, c / d)
    cn = np.where(near, c, kp * s / d)
    dn = np.where(near, d, kp / d)
    return sn_sign * sn, cn_sign * cn, dn


def jacobi_dn(u, modulus: float, complement: float | None = None):
    """Jacobi elliptic function dn(u, k); scalar in, scalar out."""
    dn = jacobi_sn_cn_dn(u, modulus, complement)[2]
    return float(dn) if np.ndim(dn) == 0 else dn


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise ValueError(f"gamma_fn is only defined here for x > 0, got {x!r}")
    return math.gamma(x)


@dataclass(frozen=True)
class MLParams:
    """Parameters (alpha, beta) of the two-parameter Mittag-Leffler function."""

    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")


_SERIES_MAX_X = 1.0
_ASYM_RTOL = 1e-11
_QUAD_RTOL = 1e-13
_EXP_CUTOFF = 750.0
_ALPHA_ONE_CUT = 60.0


def mittag_leffler_neg(p: MLParams, x, *, closed_forms: bool = True):
    """Evaluate E_{alpha,beta}(-x) for x >= 0.

    Scalars give a float, arrays give an array of the same shape.
    ``closed_forms=False`` bypasses the alpha in {1/2, 1} shortcuts so the
    generic branches can be checked against them.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(~np.isfinite(xs)):
        raise ValueError("mittag_leffler_neg requires finite x >= 0")
    flat = np.array([_ml_scalar(p.alpha, p.beta, float(v), closed_forms) for v in xs.ravel()])
    if xs.ndim == 0:
        return float(flat[0])
    return flat.reshape(xs.shape)


def _ml_scalar(alpha: float, beta: float, x: float, closed_forms: bool) -> float:
    if x == 0.0:
        return float(special.rgamma(beta))
    if closed_forms:
        if alpha == 1.0 and beta == 1.0:
            return math.exp(-x)
        if alpha == 1.0 and beta == 2.0:
            return -math.expm1(-x) / x
        if alpha == 0.5 and beta == 1.0:
            return float(special.erfcx(x))
    if x <= _SERIES_MAX_X:
        return _ml_series(alpha, beta, x)
    if alpha == 1.0:
        return _ml_alpha_one(beta, x)
    asym = _ml_asymptotic(alpha, beta, x)
    if asym is not None:
        return asym
    return _ml_laplace(alpha, beta, x)


def _ml_series(alpha: float, beta: float, x: float) -> float:
    # term magnitudes decay like x**k / Gamma(alpha k + beta); stop well below 1e-17
    terms = []
    logx = math.log(x)
    k = 0
    while True:
        arg = alpha * k + beta
        rg = float(special.rgamma(arg))
        terms.append(((-x) ** k) * rg)
        if k > 5 and arg > 2.0:
            if k * logx - math.lgamma(arg) < -41.0:
                break
        k += 1
        if k > 20000:
            raise ArithmeticError("Mittag-Leffler series did not converge")
    return math.fsum(terms)


def _rgamma_split(beta: float, alpha: float, j: int) -> float:
    """1/Gamma(beta - alpha j) without forming the argument directly.

    For alpha near 1 the argument sits next to a pole of Gamma and the
    rounding of beta - alpha j would swamp its distance to the integer, so
    z = n + delta is assembled from the exact pieces round(beta),
    beta - round(beta) and 1 - alpha.
    """
    m = round(beta)
    delta = (beta - m) + j * (1.0 - alpha)
    shift = round(delta)
    n = m - j + shift
    delta -= shift
    if n + delta >= 1.0:
        return float(special.rgamma(n + delta))
    # reflection: 1/Gamma(z) = Gamma(1 - z) sin(pi z) / pi, sin(pi z) = (-1)^n sin(pi delta)
    sign = -1.0 if n % 2 else 1.0
    return sign * math.exp(math.lgamma(1.0 - n - delta)) * math.sin(math.pi * delta) / math.pi


def _ml_asymptotic(alpha: float, beta: float, x: float) -> float | None:
    # E(-x) ~ -sum_{j>=1} (-x)^{-j} / Gamma(beta - alpha j); for 0 < alpha < 1 no
    # exponential contribution survives on the negative axis, so the
    # expansion is accepted once the next omitted term is negligible
    # 1/Gamma(z) passes close to zero near the negative integers, so the
    # decision uses the envelope |1/Gamma(z)| <= Gamma(1 - z)/pi for z < 1
    total = []
    prev_env = math.inf
    logx = math.log(x)
    for j in range(1, 80):
        z = beta - alpha * j
        term = -((-1.0) ** j) * x ** (-j) * _rgamma_split(beta, alpha, j)
        if z >= 1.0:
            env = abs(term)
        else:
            env = math.exp(math.lgamma(1.0 - z) - j * logx) / math.pi
        if env > prev_env:
            return None
        s = math.fsum(total)
        if s != 0.0 and env < _ASYM_RTOL * abs(s):
            return s
        total.append(term)
        prev_env = env
    return None


def _ml_alpha_one(beta: float, x: float) -> float:
    if beta == 1.0:
        return math.exp(-x)
    if beta > 1.0:
        # E_{1,beta}(-x) = 1/(x Gamma(beta-1)) * int_0^x exp(-v) (1-v/x)^(beta-2) dv
        if x <= _ALPHA_ONE_CUT:
            val, _ = integrate.quad(
                lambda v: math.exp(-v), 0.0, x,
                weight="alg", wvar=(0.0, beta - 2.0),
                epsabs=0.0, epsrel=_QUAD_RTOL, limit=200,
            )
            val *= x ** (2.0 - beta)
        else:
            # the remainder beyond the cut is below exp(-cut) relative to the result
            val, _ = integrate.quad(
                lambda v: math.exp(-v) * (1.0 - v / x) ** (beta - 2.0), 0.0, _ALPHA_ONE_CUT,
                epsabs=0.0, epsrel=_QUAD_RTOL, limit=200,
            )
        return val * float(special.rgamma(beta - 1.0)) / x
    # 0 < beta < 1: one step of the recurrence E_b = 1/Gamma(b) + z E_{b+1}
    return float(special.rgamma(beta)) - x * _ml_alpha_one(beta + 1.0, x)


def _sinpi(v: float) -> float:
    # reduce to |r| <= 1/2 exactly first; sin(pi v) keeps full relative
    # accuracy next to the integers, where the contour needs it
    n = round(v)
    r = v - n
    return (-1.0) ** (n % 2) * math.sin(math.pi * r)


def _cospi(v: float) -> float:
    return _sinpi(v + 0.5) if abs(v) < 2**50 else math.cos(math.pi * v)


def _ml_laplace(alpha: float, beta: float, x: float) -> float:
    """Hankel inversion of s^(alpha-beta)/(s^alpha + x) for 0 < alpha < 1.

    For beta < 1 + alpha/2 the contour collapses onto the branch cut. Otherwise
    it circles the origin at radius rho (near the saddle of e^s s^(1+alpha-beta))
    and follows the cut from rho outwards. Along the cut the variable
    u = r^alpha is used, which turns the integrand into u^p times a smooth
    factor with a single (possibly sharp) peak at u = -x cos(pi alpha).
    """
    sb = _sinpi(beta)
    cb = _cospi(beta)
    ca = _cospi(alpha)
    # u^2 + 2 x u cos(pi a) + x^2 = (u - c)^2 + w^2 and
    # u sin(pi b) + x sin(pi (b - a)) = (u - c) sin(pi b) - w cos(pi b),
    # so nothing cancels when the peak at c sharpens as alpha -> 1
    c = -x * ca
    w = x * _sinpi(alpha)
    inv_a = 1.0 / alpha
    power = (1.0 - beta) * inv_a

    def smooth(u: float) -> float:
        d = u - c
        return math.exp(-(u**inv_a)) * (d * sb - w * cb) / (d * d + w * w) * inv_a

    def full(u: float) -> float:
        return u**power * smooth(u)

    def weight(u: float) -> float:
        return math.exp(-(u**inv_a)) * u**power * inv_a

    quad_kw = dict(epsabs=0.0, epsrel=_QUAD_RTOL, limit=400)
    # the bare cut needs u^p integrable at 0 (beta < 1 + alpha); keep a margin
    rho = 0.0 if beta < 1.0 + 0.5 * alpha else max(1.0, beta - 1.0 - alpha)
    has_peak = ca < 0.0
    if has_peak and rho > 0.0 and 0.5 * c < rho**alpha < 2.0 * c:
        # keep the circle away from the near-pole at u = c
        rho = (0.5 * c) ** inv_a
    lo = rho**alpha
    hi = _EXP_CUTOFF**alpha
    window = None
    if has_peak and lo < c < hi:
        window = (max(lo, 0.5 * c), min(hi, 2.0 * c))
        breaks = sorted({lo, *window, hi})
    else:
        breaks = [lo, hi]

    def peak_window(a: float, b: float) -> float:
        # subtracting G(c) leaves a bounded integrand; the G(c) part
        # integrates in closed form to a logarithm and an arctangent
        g_c = weight(c)

        def rest(u: float) -> float:
            d = u - c
            return (weight(u) - g_c) * (d * sb - w * cb) / (d * d + w * w)

        # the integrand still turns over on the scale w next to c; geometric
        # breakpoints c +- w 10^j keep QUADPACK from stepping over that
        total = 0.0
        for end in (a, b):
            span = abs(end - c)
            offsets = [w * 10.0**j for j in range(18) if w * 10.0**j < span] + [span]
            edges = [c] + [c + math.copysign(o, end - c) for o in offsets]
            for u0, u1 in zip(edges[:-1], edges[1:]):
                total += integrate.quad(rest, min(u0, u1), max(u0, u1), **quad_kw)[0]
        log_part = 0.5 * math.log(((b - c) ** 2 + w * w) / ((a - c) ** 2 + w * w))
        angle = math.atan((b - c) / w) - math.atan((a - c) / w)
        return total + g_c * (sb * log_part - cb * angle)

    pieces = []
    with warnings.catch_warnings():
        # the sharp peak for alpha near 1 can trip QUADPACK's roundoff detector
        # long after the requested accuracy has been reached
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if rho > 0.0:
            def circle(theta: float) -> float:
                z = rho * complex(math.cos(theta), math.sin(theta))
                return (np.exp(z) * z ** (1.0 + alpha - beta) / (z**alpha + x)).real

            pieces.append(integrate.quad(circle, 0.0, math.pi, **quad_kw)[0])
        for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
            if (a, b) == window:
                val = peak_window(a, b)
            elif i == 0 and rho == 0.0:
                val, _ = integrate.quad(smooth, a, b, weight="alg", wvar=(power, 0.0), **quad_kw)
            else:
                val, _ = integrate.quad(full, a, b, **quad_kw)
            pieces.append(val)
    return math.fsum(pieces) / math.pi
