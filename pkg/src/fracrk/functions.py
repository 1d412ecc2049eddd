"""Parametric functions f(lambda), their Stieltjes/Bernstein class and bound constants."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .discretize import SpectralInterval
from .specfun import MLParams, mittag_leffler_neg

__all__ = [
    "PowPos",
    "PowNeg",
    "ML",
    "ParametricFunction",
    "FunctionClass",
    "UnboundedAtZero",
    "evaluate",
    "f_at_zero",
    "classify",
    "gamma_k",
    "bound_constant",
    "laplace_bound",
    "parse_function",
    "format_function",
]


def _check_unit(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    return v


@dataclass(frozen=True)
class PowPos:
    """lambda**s."""

    s: float

    def __post_init__(self):
        object.__setattr__(self, "s", _check_unit("s", self.s))


@dataclass(frozen=True)
class PowNeg:
    """lambda**(-s)."""

    s: float

    def __post_init__(self):
        object.__setattr__(self, "s", _check_unit("s", self.s))


@dataclass(frozen=True)
class ML:
    """E_{alpha,beta}(-t**alpha * lambda**s); alpha = 0 means 1/(1 + lambda**s)."""

    alpha: float
    beta: float = 1.0
    t: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        a = _check_unit("alpha", self.alpha)
        s = _check_unit("s", self.s)
        b, t = float(self.beta), float(self.t)
        if not b > 0.0:
            raise ValueError(f"beta must be positive, got {b!r}")
        if not b >= a:
            raise ValueError(f"need beta >= alpha for complete monotonicity, got beta={b}, alpha={a}")
        if not (t >= 0.0 and math.isfinite(t)):
            raise ValueError(f"t must be finite and >= 0, got {t!r}")
        for name, v in (("alpha", a), ("beta", b), ("t", t), ("s", s)):
            object.__setattr__(self, name, v)


ParametricFunction = Union[PowPos, PowNeg, ML]


@dataclass(frozen=True)
class FunctionClass:
    """Membership flags: Laplace-Stieltjes, Cauchy-Stieltjes, complete Bernstein."""

    LS: bool = False
    CS: bool = False
    CB: bool = False

    def __post_init__(self):
        if self.CS and not self.LS:
            raise ValueError("CS functions are always LS")

    def labels(self) -> str:
        return "+".join(n for n in ("LS", "CS", "CB") if getattr(self, n)) or "none"


class UnboundedAtZero(ValueError):
    """f(0+) is infinite, so the Laplace-Stieltjes bound is unavailable."""


def evaluate(f: ParametricFunction, lam):
    """f(lambda) for lambda > 0; scalar or array."""
    x = np.asarray(lam, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("evaluate requires lambda > 0")
    if isinstance(f, PowPos):
        out = x**f.s
    elif isinstance(f, PowNeg):
        out = x ** (-f.s)
    elif isinstance(f, ML):
        xs = x**f.s
        if f.alpha == 0.0:
            out = 1.0 / (1.0 + xs)
        else:
            out = np.asarray(mittag_leffler_neg(MLParams(f.alpha, f.beta), f.t**f.alpha * xs))
    else:
        raise TypeError(f"not a parametric function: {f!r}")
    return float(out) if np.ndim(out) == 0 else out


def f_at_zero(f: ParametricFunction) -> float:
    """lim_{lambda -> 0+} f(lambda); raises UnboundedAtZero when infinite."""
    if isinstance(f, PowPos):
        return 1.0 if f.s == 0.0 else 0.0
    if isinstance(f, PowNeg):
        if f.s == 0.0:
            return 1.0
        raise UnboundedAtZero(
            f"f(0+) is infinite for lambda^-{f.s}; shift the function, f(lambda + eta), "
            "to obtain a finite Laplace-Stieltjes constant"
        )
    if isinstance(f, ML):
        if f.alpha == 0.0:
            return 0.5 if f.s == 0.0 else 1.0
        if f.s == 0.0:
            # lambda**0 = 1, so f is the constant E(-t^alpha)
            return float(mittag_leffler_neg(MLParams(f.alpha, f.beta), f.t**f.alpha))
        return float(mittag_leffler_neg(MLParams(f.alpha, f.beta), 0.0))
    raise TypeError(f"not a parametric function: {f!r}")


def classify(f: ParametricFunction) -> FunctionClass:
    """Stieltjes/Bernstein membership used to pick the bound constant.

    lambda^s is CB for 0 < s < 1 (s = 1 is kept as the CB limit, s = 0 is the
    constant 1, which is LS). lambda^-s is LS, and CS for 0 < s < 1. The
    Mittag-Leffler family is LS, and CS when t > 0, s > 0 and s + alpha/2 < 1.
    """
    if isinstance(f, PowPos):
        if f.s == 0.0:
            return FunctionClass(LS=True)
        return FunctionClass(CB=True)
    if isinstance(f, PowNeg):
        return FunctionClass(LS=True, CS=0.0 < f.s < 1.0)
    if isinstance(f, ML):
        cs = f.t > 0.0 and f.s > 0.0 and f.s + 0.5 * f.alpha < 1.0
        return FunctionClass(LS=True, CS=cs)
    raise TypeError(f"not a parametric function: {f!r}")


def gamma_k(k: int, interval: SpectralInterval) -> float:
    """gamma_k = 2.23 + (2/pi) ln(4k sqrt(lambda_U / (lambda_L pi)))."""
    if k < 1:
        raise ValueError(f"gamma_k needs k >= 1, got {k}")
    return 2.23 + (2.0 / math.pi) * math.log(4.0 * k * math.sqrt(interval.hi / (interval.lo * math.pi)))


def bound_constant(
    f: ParametricFunction, cls: FunctionClass, interval: SpectralInterval, k: int
) -> float:
    """The constant c_k of the certified bound, smallest over the applicable branches.

    CS gives f(lambda_L), CB gives f(lambda_U) and LS gives 4 gamma_k f(0+).
    lambda^-s uses the s-independent constant max(1, 1/lambda_L): s = 0 is
    reproduced exactly, s = 1 follows from the resolvent bound at zeta = 0.
    """
    if isinstance(f, PowNeg):
        return max(1.0, 1.0 / interval.lo)
    candidates = []
    if cls.CS:
        candidates.append(evaluate(f, interval.lo))
    if cls.CB:
        candidates.append(evaluate(f, interval.hi))
    if cls.LS:
        try:
            candidates.append(4.0 * gamma_k(max(k, 1), interval) * f_at_zero(f))
        except UnboundedAtZero:
            if not candidates:
                raise
    if not candidates:
        raise ValueError(f"{f!r} has no Stieltjes/Bernstein class")
    return float(min(candidates))


def laplace_bound(alpha: float, s: float, t: float, lam_lo: float, c_alpha: float = 1.0) -> float:
    """2 c_alpha (1/lambda_L + ln(1 + t^-alpha) / s) for the Mittag-Leffler family.

    The estimate it stands for needs s + alpha < 2; the formula itself is
    evaluated on the closed parameter box so the limit case can be inspected.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not 0.0 < s <= 1.0:
        raise ValueError(f"s must lie in (0, 1], got {s!r}")
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t!r}")
    if not lam_lo > 0.0:
        raise ValueError(f"lambda_L must be positive, got {lam_lo!r}")
    return 2.0 * c_alpha * (1.0 / lam_lo + math.log1p(t ** (-alpha)) / s)


_POW_RE = re.compile(r"^pow:([+-])\s*([0-9.eE+-]+)$")


def parse_function(text: str) -> ParametricFunction:
    """Parse ``pow:+0.5``, ``pow:-0.5`` or ``ml:alpha=0.5,beta=1,t=1.5,s=0.75``."""
    spec = text.strip()
    m = _POW_RE.match(spec)
    if m:
        s = float(m.group(2))
        return PowPos(s) if m.group(1) == "+" else PowNeg(s)
    if spec.startswith("ml:"):
        fields = {}
        for part in spec[3:].split(","):
            if not part.strip():
                continue
            key, sep, val = part.partition("=")
            key = key.strip()
            if not sep or key not in ("alpha", "beta", "t", "s"):
                raise ValueError(f"bad Mittag-Leffler field {part!r} in {text!r}")
            if key in fields:
                raise ValueError(f"duplicate field {key!r} in {text!r}")
            fields[key] = float(val)
        if "alpha" not in fields:
            raise ValueError(f"missing alpha in {text!r}")
        return ML(**fields)
    raise ValueError(f"unrecognized function descriptor {text!r}")


def format_function(f: ParametricFunction) -> str:
    if isinstance(f, PowPos):
        return f"pow:+{f.s:g}"
    if isinstance(f, PowNeg):
        return f"pow:-{f.s:g}"
    return f"ml:alpha={f.alpha:g},beta={f.beta:g},t={f.t:g},s={f.s:g}"
