"""Parameter, convergence and certificate sweeps with CSV output.

A sweep is described by an INI-style file::

    [operator]
    kind = fd2d
    size = 31
    safety = 1.0
    # interval = 19, 348475

    [function]
    family = ml
    alpha = 0.25, 0.5, 0.75
    beta = 1
    t = 0.5:0.5:20
    s = 0.75

    [poles]
    strategies = Z, E, A
    k = 1:25

    [output]
    path = sweep.csv
    seed = 0

Grids accept comma separated numbers and inclusive ranges ``a:b`` (unit
step) or ``a:step:b``.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certificate import certify, error_bound
from .discretize import GENERATORS, SpectralInterval, make_operator, spectral_bounds
from .functions import ML, ParametricFunction, PowNeg, PowPos, evaluate
from .linalg import OperatorPair, m_norm
from .poles import STRATEGIES, make_poles, zolotarev_rate
from .rkm import build_basis, exact_apply, rkm_error

__all__ = [
    "ConfigError",
    "SweepConfig",
    "parse_config",
    "parse_grid",
    "SCHEMAS",
    "run_paramstudy",
    "run_convergence",
    "run_certificates",
    "write_csv",
    "bound_violations",
    "worker_count",
    "WORKERS_ENV",
]

K_MAX = 60
WORKERS_ENV = "FRACRK_WORKERS"
FAMILIES = ("ml", "pow+", "pow-")
# strategies whose poles for k are the first k poles for any larger k
NESTED = frozenset("EGSAF")
# the certificate greedy needs a starting pair of poles
MIN_K = {"A": 2, "F": 2}

SCHEMAS = {
    "paramstudy": ("fracrk.paramstudy/1", ("family", "alpha", "beta", "t", "s", "strategy", "k", "error", "bound", "reference")),
    "converge": ("fracrk.converge/1", ("family", "alpha", "beta", "t", "s", "strategy", "k", "error", "delta", "bound")),
    "certcmp": ("fracrk.certcmp/1", ("strategy", "k", "delta", "zolotarev_bound")),
}


class ConfigError(ValueError):
    """Invalid sweep configuration; the message names the section and key."""


@dataclass(frozen=True)
class SweepConfig:
    operator: str = "fd2d"
    size: int = 31
    family: str = "ml"
    alpha: tuple[float, ...] = (0.5,)
    beta: tuple[float, ...] = (1.0,)
    t: tuple[float, ...] = (1.5,)
    s: tuple[float, ...] = (0.5,)
    strategies: tuple[str, ...] = ("Z",)
    k: tuple[int, ...] = tuple(range(1, 26))
    interval: tuple[float, float] | None = None
    out: Path | None = None
    safety: float = 1.0
    seed: int = 0
    source: str = field(default="<defaults>", compare=False)

    def __post_init__(self):
        if self.operator not in GENERATORS:
            raise ConfigError(f"[operator] kind: unknown operator {self.operator!r}; choose from {sorted(GENERATORS)}")
        if self.family not in FAMILIES:
            raise ConfigError(f"[function] family: unknown family {self.family!r}; choose from {FAMILIES}")
        for name in ("alpha", "beta", "t", "s", "strategies", "k"):
            if not getattr(self, name):
                raise ConfigError(f"{name}: grid is empty")
        for x in self.strategies:
            if x not in STRATEGIES:
                raise ConfigError(f"[poles] strategies: unknown strategy {x!r}; choose from {STRATEGIES}")
        for k in self.k:
            if not 0 <= k <= K_MAX:
                raise ConfigError(f"[poles] k: {k} outside [0, {K_MAX}]")
        if not self.safety >= 1.0:
            raise ConfigError(f"[operator] safety: must be >= 1, got {self.safety}")
        if self.interval is not None:
            try:
                SpectralInterval(*self.interval)
            except ValueError as exc:
                raise ConfigError(f"[operator] interval: {exc}") from None
        try:
            self.functions()
        except ValueError as exc:
            raise ConfigError(f"[function]: {exc}") from None

    def functions(self) -> list[ParametricFunction]:
        """The function grid in (alpha, beta, t, s) lexicographic order."""
        if self.family == "pow+":
            return [PowPos(s) for s in self.s]
        if self.family == "pow-":
            return [PowNeg(s) for s in self.s]
        return [ML(a, b, t, s) for a in self.alpha for b in self.beta for t in self.t for s in self.s]


_SCHEMA_KEYS = {
    "operator": {"kind", "size", "safety", "interval"},
    "function": {"family", "alpha", "beta", "t", "s"},
    "poles": {"strategies", "k"},
    "output": {"path", "seed"},
}


def _clean(x: float) -> float:
    # range arithmetic leaves trailing bits (0.1 * 3); 12 digits is plenty for grids
    return float(f"{x:.12g}")


def parse_grid(text: str, integer: bool = False) -> tuple:
    """Expand ``0, 0.5, 1:0.25:2`` into a tuple of numbers."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        pieces = [p.strip() for p in part.split(":")]
        if len(pieces) == 1:
            out.append(float(pieces[0]))
            continue
        if len(pieces) == 2:
            a, step, b = float(pieces[0]), 1.0, float(pieces[1])
        elif len(pieces) == 3:
            a, step, b = (float(p) for p in pieces)
        else:
            raise ValueError(f"bad range {part!r}")
        if not step > 0.0:
            raise ValueError(f"range step must be positive in {part!r}")
        if b < a:
            raise ValueError(f"empty range {part!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        out.extend(_clean(a + i * step) for i in range(n))
    if integer:
        if any(x != int(x) for x in out):
            raise ValueError(f"expected integers in {text!r}")
        return tuple(int(x) for x in out)
    return tuple(out)


def parse_config(path: str | Path) -> SweepConfig:
    """Read a sweep file; unknown sections or keys are rejected."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    kwargs: dict = {"source": str(path)}
    for section in parser.sections():
        if section not in _SCHEMA_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA_KEYS[section]:
                raise ConfigError(f"{path}: [{section}] unknown key {key!r}")
            where = f"{path}: [{section}] {key}"
            try:
                if (section, key) == ("operator", "kind"):
                    kwargs["operator"] = raw.strip()
                elif (section, key) == ("operator", "size"):
                    kwargs["size"] = int(raw)
                elif (section, key) == ("operator", "safety"):
                    kwargs["safety"] = float(raw)
                elif (section, key) == ("operator", "interval"):
                    lo, hi = (float(v) for v in raw.split(","))
                    kwargs["interval"] = (lo, hi)
                elif (section, key) == ("function", "family"):
                    kwargs["family"] = raw.strip()
                elif section == "function":
                    kwargs[key] = parse_grid(raw)
                elif key == "strategies":
                    kwargs["strategies"] = tuple(x.strip() for x in raw.split(",") if x.strip())
                elif key == "k":
                    kwargs["k"] = parse_grid(raw, integer=True)
                elif key == "path":
                    p = Path(raw.strip())
                    kwargs["out"] = p if p.is_absolute() else path.parent / p
                elif key == "seed":
                    kwargs["seed"] = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
    try:
        return SweepConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _pmap(fun, items) -> list:
    """Map over independent jobs; results keep the input order."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fun, items))


@dataclass
class _Setup:
    op: OperatorPair
    interval: SpectralInterval
    b: np.ndarray
    poles: dict  # (strategy, k) -> PoleSet


def _start_vector(op: OperatorPair, seed: int) -> np.ndarray:
    b = np.random.default_rng(seed).standard_normal(op.n)
    return b / m_norm(b, op.M)


def _interval_for(cfg: SweepConfig, op: OperatorPair) -> SpectralInterval:
    if cfg.interval is not None:
        return SpectralInterval(*cfg.interval).widened(cfg.safety)
    return spectral_bounds(op, cfg.safety)


def _pole_sets(cfg: SweepConfig, op: OperatorPair, interval: SpectralInterval, b: np.ndarray) -> dict:
    out = {}
    for strat in cfg.strategies:
        ks = [k for k in cfg.k if k >= MIN_K.get(strat, 0)]
        if not ks:
            continue
        if strat in NESTED:
            full = make_poles(strat, max(ks), interval, op, b)
            for k in ks:
                # the weak greedy may stop early once the residual vanishes
                out[strat, k] = full.prefix(min(k, full.k))
        else:
            for k in ks:
                out[strat, k] = make_poles(strat, k, interval, op, b)
    return out


def _setup(cfg: SweepConfig) -> _Setup:
    op = make_operator(cfg.operator, cfg.size)
    interval = _interval_for(cfg, op)
    b = _start_vector(op, cfg.seed)
    return _Setup(op, interval, b, _pole_sets(cfg, op, interval, b))


def _params(f: ParametricFunction) -> tuple[str, float, float, float, float]:
    if isinstance(f, ML):
        return "ml", f.alpha, f.beta, f.t, f.s
    fam = "pow+" if isinstance(f, PowPos) else "pow-"
    return fam, math.nan, math.nan, math.nan, f.s


def _reference(f: ParametricFunction, lam_lo: float) -> float:
    # the decay profile E_{alpha,1}(-t^alpha lambda_L^s) that the errors follow in t
    if isinstance(f, ML):
        f = ML(f.alpha, 1.0, f.t, f.s)
    return float(evaluate(f, lam_lo))


def _error_rows(cfg: SweepConfig, st: _Setup, with_reference: bool) -> list[dict]:
    keys = [(x, k) for x in cfg.strategies for k in cfg.k if (x, k) in st.poles]
    bases = dict(zip(keys, _pmap(lambda key: build_basis(st.op, st.b, st.poles[key]), keys)))
    deltas = {key: certify(st.poles[key], st.interval).delta for key in keys}

    def job(f: ParametricFunction) -> list[dict]:
        exact = exact_apply(st.op, f, st.b)
        fam, a, beta, t, s = _params(f)
        rows = []
        for strat, k in keys:
            ps = st.poles[strat, k]
            err = rkm_error(st.op, f, ps, st.b, basis=bases[strat, k], exact=exact)
            bound = error_bound(f, ps, st.interval, max(ps.k, 1), 1.0, delta=deltas[strat, k])
            row = {"family": fam, "alpha": a, "beta": beta, "t": t, "s": s, "strategy": strat, "k": k, "error": err}
            if with_reference:
                row["bound"] = bound
                row["reference"] = _reference(f, st.interval.lo)
            else:
                row["delta"] = deltas[strat, k]
                row["bound"] = bound
            rows.append(row)
        return rows

    return [row for chunk in _pmap(job, cfg.functions()) for row in chunk]


def run_paramstudy(cfg: SweepConfig) -> list[dict]:
    """Errors over the (alpha, beta, t, s) grid with the reference E_{alpha,1}(-t^alpha lambda_L^s)."""
    return _error_rows(cfg, _setup(cfg), with_reference=True)


def run_convergence(cfg: SweepConfig) -> list[dict]:
    """Errors, certificates and bounds against k for every strategy."""
    return _error_rows(cfg, _setup(cfg), with_reference=False)


def run_certificates(cfg: SweepConfig) -> list[dict]:
    """Delta for every strategy and k on a shared interval, with 2 exp(-C* k)."""
    st = _setup(cfg)
    rate = zolotarev_rate(st.interval)
    keys = [(x, k) for x in cfg.strategies for k in cfg.k if (x, k) in st.poles]
    deltas = _pmap(lambda key: certify(st.poles[key], st.interval).delta, keys)
    return [
        {"strategy": x, "k": k, "delta": d, "zolotarev_bound": 2.0 * math.exp(-rate * k)}
        for (x, k), d in zip(keys, deltas)
    ]


def write_csv(rows: list[dict], kind: str, path: str | Path | None = None) -> str:
    """Serialize rows under the versioned schema; write to ``path`` if given."""
    tag, columns = SCHEMAS[kind]
    buf = io.StringIO()
    buf.write(f"# schema={tag}\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: repr(v) if isinstance(v, float) else v for c, v in row.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def bound_violations(rows: list[dict]) -> list[dict]:
    """Rows whose error exceeds the certified bound."""
    return [r for r in rows if "bound" in r and r["error"] > r["bound"]]
