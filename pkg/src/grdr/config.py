"""Experiment configuration: parsing, validation and problem construction."""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import covmodel, payoffs, schedule
from .errors import ConfigError, GrdrError
from .factor import make_factor

FACTOR_KINDS = ("cholesky", "pca", "pca+permute-check", "cholesky+permute", "pca+permute")
Q_KINDS = ("harmonic", "factor", "ones")
COV_FAMILIES = ("eigen_decay", "equicorrelation")
PAYOFF_KINDS = (payoffs.CONSTANT, payoffs.LINEAR, payoffs.BASKET_CALL)


@dataclass
class ExperimentConfig:
    """All knobs of an experiment; every field is also a CLI flag.

    ``covariance`` is ``eigen_decay``, ``equicorrelation`` or a matrix file.
    ``q`` is ``harmonic``, ``factor``, ``ones`` or a q-vector file.
    ``payoff_a`` and ``sigmas`` accept a number, a comma list, a file path, or
    (for ``payoff_a``) the keywords ``ones``, ``scaled_ones`` and ``e1``.
    """

    covariance: str = "eigen_decay"
    gamma: float = -2.0
    lambda1: float = 1.0
    orient: str = covmodel.DIAGONAL
    rotation_seed: int = 0
    rho: float = 0.5
    payoff: str = payoffs.LINEAR
    payoff_c: float = 1.0
    payoff_a: str = "scaled_ones"
    sigmas: str = "0.2"
    rate: float = 0.0
    maturity: float = 1.0
    strike: float = 1.0
    kappa: str = "auto"
    factor: str = "pca"
    q: str = "factor"
    n_override: int = 0
    R: int = 10000
    seed: int = 12345
    d: list = field(default_factory=lambda: [16, 64, 256])
    match: str = "ops"
    pairs: int = 20000
    probes: int = 20000
    debug_verify: bool = False
    backend: str = "auto"
    jobs: int = 1
    out: str = ""
    bounds_out: str = ""
    curves_out: str = ""
    report_out: str = ""

    def fingerprint(self) -> str:
        from .estimator import fingerprint
        items = sorted((k, v) for k, v in asdict(self).items()
                       if k not in ("out", "bounds_out", "curves_out", "report_out", "jobs", "backend"))
        return fingerprint(*(f"{k}={v}" for k, v in items))


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw):
    typ = _FIELD_TYPES[name]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if typ == "float":
            return float(raw)
        if typ == "int":
            return int(raw)
        if typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off", ""):
                return False
            raise ValueError(raw)
        if typ == "list":
            return [int(x) for x in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {typ}", name) from None
    return raw


def parse_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments) into a dict of raw strings."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist", "config")
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[experiment]\n" + p.read_text())
    except configparser.Error as exc:
        raise ConfigError(str(exc), "config") from None
    return dict(cp["experiment"])


def build_config(values: dict) -> ExperimentConfig:
    kwargs = {}
    for k, v in values.items():
        if k not in _FIELD_TYPES:
            raise ConfigError("unknown key", k)
        kwargs[k] = _coerce(k, v)
    cfg = ExperimentConfig(**kwargs)
    validate_config(cfg)
    return cfg


def _is_path(s: str) -> bool:
    return "/" in s or s.endswith((".txt", ".dat", ".csv"))


def validate_config(cfg: ExperimentConfig) -> None:
    """Check ranges and load every referenced file once, before any computation."""
    if not cfg.d or any(x < 1 for x in cfg.d):
        raise ConfigError("dimensions must be positive integers", "d")
    if any(b <= a for a, b in zip(cfg.d, cfg.d[1:])):
        raise ConfigError("d-sweep entries must be strictly increasing", "d")
    if cfg.R < 2:
        raise ConfigError("need at least 2 replications", "R")
    if not (0 <= cfg.seed < 2**64):
        raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
    if cfg.factor not in FACTOR_KINDS:
        raise ConfigError(f"expected one of {FACTOR_KINDS}", "factor")
    if cfg.payoff not in PAYOFF_KINDS:
        raise ConfigError(f"expected one of {PAYOFF_KINDS}", "payoff")
    if cfg.match not in ("ops", "samples"):
        raise ConfigError("expected 'ops' or 'samples'", "match")
    if cfg.backend not in ("auto", "cython", "python"):
        raise ConfigError("expected auto, cython or python", "backend")
    if cfg.n_override < 0:
        raise ConfigError("must be >= 0 (0 keeps n = ceil(d / sum q))", "n_override")
    if cfg.pairs < 3:
        raise ConfigError("need at least 3 pairs", "pairs")
    if cfg.covariance not in COV_FAMILIES:
        try:
            m = covmodel.read_matrix(cfg.covariance)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc), "covariance") from None
        if cfg.d != [m.shape[0]]:
            raise ConfigError(f"matrix file has d={m.shape[0]}; set d = {m.shape[0]}", "d")
    elif cfg.covariance == "eigen_decay":
        if not cfg.lambda1 > 0:
            raise ConfigError("must be positive", "lambda1")
        if cfg.orient not in (covmodel.DIAGONAL, covmodel.RANDOM_ROTATION):
            raise ConfigError("expected diagonal or random_rotation", "orient")
    if cfg.q not in Q_KINDS:
        try:
            sched = schedule.load(cfg.q)
        except OSError as exc:
            raise ConfigError(str(exc), "q") from None
        except GrdrError as exc:
            raise ConfigError(str(exc), "q") from None
        if any(x != sched.dim for x in cfg.d):
            raise ConfigError(f"q file has length {sched.dim}, sweep uses d={cfg.d}", "q")
    for key in ("payoff_a", "sigmas"):
        raw = getattr(cfg, key)
        if _is_path(raw) and not Path(raw).is_file():
            raise ConfigError(f"file {raw} does not exist", key)
    if cfg.kappa not in ("auto", "probe"):
        try:
            if not float(cfg.kappa) > 0:
                raise ValueError
        except ValueError:
            raise ConfigError("expected a positive number, 'auto' or 'probe'", "kappa") from None
    for d in cfg.d:
        make_payoff(cfg, d)


def _vector(raw: str, d: int, name: str, keywords=None) -> np.ndarray:
    raw = raw.strip()
    if keywords and raw in keywords:
        return keywords[raw](d)
    if _is_path(raw):
        vals = [float(x) for x in Path(raw).read_text().split() if not x.startswith("#")]
    else:
        try:
            vals = [float(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"cannot parse {raw!r}", name) from None
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) != d:
        raise ConfigError(f"has {len(vals)} entries, expected {d}", name)
    return np.array(vals)


_A_KEYWORDS = {
    "ones": lambda d: np.ones(d),
    "scaled_ones": lambda d: np.full(d, 1.0 / math.sqrt(d)),
    "e1": lambda d: np.eye(d)[0],
}


def make_payoff(cfg: ExperimentConfig, d: int) -> payoffs.Payoff:
    if cfg.payoff == payoffs.CONSTANT:
        return payoffs.constant(d, cfg.payoff_c)
    if cfg.payoff == payoffs.LINEAR:
        return payoffs.linear(_vector(cfg.payoff_a, d, "payoff_a", _A_KEYWORDS))
    return payoffs.basket_call(_vector(cfg.sigmas, d, "sigmas"), cfg.rate, cfg.maturity, cfg.strike)


def make_covariance(cfg: ExperimentConfig, d: int) -> covmodel.CovarianceSpec:
    if cfg.covariance == "eigen_decay":
        return covmodel.make_eigen_decay(d, cfg.gamma, cfg.lambda1, cfg.orient, cfg.rotation_seed)
    if cfg.covariance == "equicorrelation":
        return covmodel.make_equicorrelation(d, cfg.rho)
    return covmodel.load(cfg.covariance)


def make_schedule(cfg: ExperimentConfig, fac) -> schedule.QSchedule:
    d = fac.dim
    if cfg.q == "harmonic":
        sched = schedule.harmonic(d)
    elif cfg.q == "factor":
        sched = schedule.from_factor(fac)
    elif cfg.q == "ones":
        sched = schedule.ones(d)
    else:
        sched = schedule.load(cfg.q)
    if cfg.n_override:
        sched = schedule.QSchedule(sched.q, sched.kind, cfg.n_override)
    return sched


@dataclass
class Problem:
    d: int
    spec: covmodel.CovarianceSpec
    fac: object
    sched: schedule.QSchedule
    payoff: payoffs.Payoff


def build_problem(cfg: ExperimentConfig, d: int) -> Problem:
    spec = make_covariance(cfg, d)
    fac = make_factor(spec, cfg.factor)
    return Problem(d, spec, fac, make_schedule(cfg, fac), make_payoff(cfg, d))


def family_label(cfg: ExperimentConfig) -> str:
    if cfg.covariance == "eigen_decay":
        return f"eigen_decay(gamma={cfg.gamma:g})"
    if cfg.covariance == "equicorrelation":
        return f"equicorrelation(rho={cfg.rho:g})"
    return "explicit"
