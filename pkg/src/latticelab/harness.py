"""Experiment orchestration: configs, LHS-vs-RHS comparison, reports and artifacts.

A config is a JSON document.  Example::

    {
      "kind": "siegel",
      "n": 2,
      "test_function": {"primal": [{"gaussian": 1.0}]},
      "ensemble": {"kind": "x2", "samples": 100000},
      "seed": 0
    }

Statistics are module-level callables so that chunks can be shipped to
worker processes; the number of workers comes from ``LAB_THREADS``.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, ensembles, geom, intlin, rhs, transforms, weights
from .ensembles import EnsembleSpec
from .errors import ConfigError, DomainError, LabError
from .geom import MEMBERSHIP_TOL, Lattice
from .transforms import Estimate, TestFunction
from .weights import TruncatedValue

KINDS = ("siegel", "rogers", "dual", "fbeta", "weights", "moments", "selftest")

__all__ = [
    "KINDS",
    "TolerancePolicy",
    "ExperimentConfig",
    "RunReport",
    "compare",
    "run_experiment",
    "write_artifacts",
    "load_config",
    "worker_count",
]


@dataclass(frozen=True)
class TolerancePolicy:
    """``sigmas`` standard errors plus the RHS tail make a pass.

    A run whose standard error exceeds ``max_stderr`` is inconclusive;
    ``stderr_floor`` keeps the z-score finite for exact (zero-variance) LHS.
    """

    sigmas: float = 3.0
    max_stderr: float = math.inf
    stderr_floor: float = 1e-12

    def to_dict(self) -> dict:
        return {"sigmas": self.sigmas, "max_stderr": None if math.isinf(self.max_stderr) else self.max_stderr, "stderr_floor": self.stderr_floor}

    @classmethod
    def from_dict(cls, d: dict | None) -> "TolerancePolicy":
        d = d or {}
        ms = d.get("max_stderr")
        return cls(float(d.get("sigmas", 3.0)), math.inf if ms is None else float(ms), float(d.get("stderr_floor", 1e-12)))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 2
    k1: int = 1
    k2: int = 0
    test_function: TestFunction | None = None
    ensemble: EnsembleSpec | None = None
    H: int = 64
    Dmax: int = 2000
    beta_bound: int | None = None
    seed: int = 0
    tolerance: TolerancePolicy = field(default_factory=TolerancePolicy)
    output_dir: str = "runs"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for name in ("n", "H", "Dmax"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.k1 < 0 or self.k2 < 0:
            raise ConfigError("k1, k2 must be nonnegative")
        if self.beta_bound is not None and self.beta_bound < 0:
            raise ConfigError("beta_bound must be nonnegative")
        if self.kind == "dual" and self.n <= self.k1 + self.k2:
            raise ConfigError(f"dual experiments need n > k1 + k2 (n={self.n}, k1+k2={self.k1 + self.k2})")
        if self.kind in ("siegel", "rogers", "dual", "fbeta", "moments") and self.ensemble is None:
            raise ConfigError(f"{self.kind} experiments need an ensemble")
        if self.kind in ("siegel", "rogers", "dual", "fbeta") and self.test_function is None:
            raise ConfigError(f"{self.kind} experiments need a test function")
        if self.ensemble is not None and self.ensemble.n != self.n:
            raise ConfigError(f"ensemble dimension {self.ensemble.n} does not match n={self.n}")
        if self.test_function is not None:
            tf = self.test_function
            if (tf.k1, tf.k2) != (self.k1, self.k2):
                raise ConfigError(f"test function has slots ({tf.k1}, {tf.k2}), config says ({self.k1}, {self.k2})")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        ens = self.ensemble
        if ens is not None and not ens.exhaustive:
            ens = replace(ens, seed=seed)
        return replace(self, seed=seed, ensemble=ens)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "k1": self.k1,
            "k2": self.k2,
            "test_function": None if self.test_function is None else self.test_function.to_dict(),
            "ensemble": None if self.ensemble is None else self.ensemble.to_dict(),
            "H": self.H,
            "Dmax": self.Dmax,
            "beta_bound": self.beta_bound,
            "seed": self.seed,
            "tolerance": self.tolerance.to_dict(),
            "output_dir": self.output_dir,
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"kind", "n", "k1", "k2", "test_function", "ensemble", "H", "Dmax", "beta_bound", "seed", "tolerance", "output_dir", "options"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        try:
            seed = int(d.get("seed", 0))
            tf = d.get("test_function")
            tf = None if tf is None else TestFunction.from_dict(tf)
            ens = d.get("ensemble")
            ens = None if ens is None else EnsembleSpec.from_dict(ens, seed=None if "seed" in ens else seed)
            n = int(d.get("n", ens.n if ens is not None else 2))
            k1 = int(d.get("k1", tf.k1 if tf is not None else 1))
            k2 = int(d.get("k2", tf.k2 if tf is not None else 0))
            bb = d.get("beta_bound")
            cfg = cls(
                kind=d["kind"],
                n=n,
                k1=k1,
                k2=k2,
                test_function=tf,
                ensemble=ens,
                H=int(d.get("H", 64)),
                Dmax=int(d.get("Dmax", 2000)),
                beta_bound=None if bb is None else int(bb),
                seed=seed,
                tolerance=TolerancePolicy.from_dict(d.get("tolerance")),
                output_dir=str(d.get("output_dir", "runs")),
                options=dict(d.get("options") or {}),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, DomainError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(data)


@dataclass
class RunReport:
    config: ExperimentConfig
    lhs: Estimate
    rhs: TruncatedValue
    z_score: float
    verdict: str
    wall_time: float
    manifest: dict
    details: dict = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "lhs": self.lhs.to_dict(),
            "rhs": {"value": self.rhs.value, "tail": self.rhs.tail_bound, "cutoff": self.rhs.cutoff, "rigorous": self.rhs.rigorous},
            "z_score": self.z_score,
            "verdict": self.verdict,
            "wall_time": self.wall_time,
            "manifest": self.manifest,
            "details": self.details,
        }


def compare(lhs: Estimate, rhs_value: TruncatedValue, policy: TolerancePolicy = TolerancePolicy()):
    """Return ``(z, verdict)`` for an estimate against a truncated value."""
    se, tail = lhs.stderr, rhs_value.tail_bound
    z = (lhs.mean - rhs_value.value - tail / 2) / max(se, policy.stderr_floor)
    if se > policy.max_stderr:
        return z, "inconclusive"
    ok = abs(lhs.mean - rhs_value.value) <= policy.sigmas * se + tail
    return z, "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# statistics (picklable)


@dataclass(frozen=True)
class SiegelStatistic:
    f: object

    def __call__(self, L: Lattice) -> float:
        return transforms.siegel_sum(L, self.f)


@dataclass(frozen=True)
class ControlledTheta:
    """``Θ_L − h(L) + E[h]`` with ``h`` the theta sum of the shortest line of ``L``.

    The shortest vector is read off the basis, so members must come from the
    reduced fundamental domain (as the ``x2`` sampler produces them).
    """

    t: float
    mean_h: float

    def __call__(self, L: Lattice) -> float:
        theta = transforms.siegel_sum(L, transforms.Gaussian(self.t))
        l2 = float(np.min(np.sum(L.basis**2, axis=0)))
        return theta - rhs.line_theta(self.t / l2) + self.mean_h


@dataclass(frozen=True)
class MultisumStatistic:
    rho: TestFunction

    def __call__(self, L: Lattice) -> float:
        return transforms.product_multisum(L, self.rho)


@dataclass(frozen=True)
class PrimitiveStatistic:
    rho: TestFunction
    k: int

    def __call__(self, L: Lattice) -> float:
        return transforms.primitive_tuple_sum(L, self.k, self.rho)


@dataclass(frozen=True)
class FBetaStatistic:
    beta: tuple
    rho: TestFunction

    def __call__(self, L: Lattice) -> float:
        return transforms.f_beta_sum(L, np.array(self.beta, dtype=np.int64), self.rho)


@dataclass(frozen=True)
class ControlledFBeta:
    """``F_β(L) − a (T − E[T]) − b (T² − E[T²])`` with ``T = Θ_L − 1``.

    The means are exact over the Hecke set, so the statistic is unbiased for
    any fixed ``a, b``; the coefficients are fitted beforehand on members the
    estimate does not use.
    """

    beta: int
    rho: TestFunction
    tol: float
    a: float
    b: float
    mean_T: float
    mean_T2: float

    def __call__(self, L: Lattice) -> float:
        F = transforms.f_beta_sums(L, [self.beta], self.rho, self.tol)[0]
        T = transforms.siegel_sum(L, self.rho.primal_slots[0]) - 1.0
        return F - self.a * (T - self.mean_T) - self.b * (T * T - self.mean_T2)


@dataclass(frozen=True)
class MomentStatistic:
    V: tuple
    W: tuple

    def __call__(self, L: Lattice) -> float:
        N, M = transforms.count_statistic(L, self.V, self.W)
        return float(math.prod(N) * math.prod(M))


# ---------------------------------------------------------------------------
# running


def worker_count() -> int:
    raw = os.environ.get("LAB_THREADS", "1")
    try:
        w = int(raw)
    except ValueError as exc:
        raise ConfigError(f"LAB_THREADS must be an integer, got {raw!r}") from exc
    if w < 1:
        raise ConfigError("LAB_THREADS must be >= 1")
    return w


def _estimate(spec: EnsembleSpec, statistic, keep_values: bool) -> Estimate:
    workers = worker_count()
    if workers == 1:
        return transforms.ensemble_estimate(spec, statistic, keep_values=keep_values)
    with multiprocessing.get_context("spawn").Pool(workers) as pool:
        return transforms.ensemble_estimate(spec, statistic, mapper=pool.map, keep_values=keep_values)


def _exact(value: float) -> Estimate:
    return Estimate(value, 0.0, 1, 0, None)


def _run_siegel(cfg: ExperimentConfig):
    f = cfg.test_function.primal_slots[0]
    if cfg.k1 != 1 or cfg.k2 != 0:
        raise ConfigError("siegel experiments take one primal slot")
    target = TruncatedValue(rhs.siegel_rhs(f, cfg.n), 0.0, 0)
    details = {}
    stat = SiegelStatistic(f)
    if cfg.options.get("control_variate"):
        if cfg.ensemble.kind != "x2" or not isinstance(f, transforms.Gaussian):
            raise ConfigError("the control variate needs an x2 ensemble and a Gaussian slot")
        mean_h = rhs.x2_line_theta_mean(f.t)
        stat = ControlledTheta(f.t, mean_h)
        details["control_mean"] = mean_h
    return stat, target, details


def _run_rogers(cfg: ExperimentConfig):
    rho = cfg.test_function
    if cfg.k2 != 0:
        raise ConfigError("rogers experiments take primal slots only")
    if cfg.options.get("primitive"):
        return PrimitiveStatistic(rho, cfg.k1), TruncatedValue(rhs.primitive_rhs(rho, cfg.n, cfg.k1), 0.0, 0), {}
    return MultisumStatistic(rho), rhs.rogers_rhs(rho, cfg.n, cfg.k1, H=cfg.H, seed=cfg.seed), {}


def _run_dual(cfg: ExperimentConfig):
    br = rhs.dual_rhs(cfg.test_function, cfg.n, H=min(cfg.H, 16), Dmax=cfg.Dmax, beta_bound=cfg.beta_bound, seed=cfg.seed)
    details = {"constant_term": br.constant_term, "series_terms": len(br.terms), "notes": br.notes}
    return MultisumStatistic(cfg.test_function), br.as_truncated(), details


def _run_fbeta(cfg: ExperimentConfig):
    if "beta" not in cfg.options:
        raise ConfigError("fbeta experiments need options.beta")
    beta = np.array(cfg.options["beta"], dtype=np.int64).reshape(cfg.k1, cfg.k2)
    rho = cfg.test_function
    m1 = beta.shape[0]
    eye1 = np.eye(m1, dtype=np.int64)
    eye2 = np.eye(beta.shape[1], dtype=np.int64)
    eta = rhs.eta_integral(beta, eye1, eye2, rho, cfg.n, seed=cfg.seed)
    zp = weights.zeta_product(cfg.n, m1)
    target = TruncatedValue(eta.value / zp, eta.tail_bound / zp, 0, rigorous=eta.rigorous)
    details = {"eta": eta.value}
    if cfg.options.get("control_variate"):
        return _controlled_fbeta(cfg, int(beta[0, 0]), rho, details), target, details
    return FBetaStatistic(tuple(map(tuple, beta.tolist())), rho), target, details


#: pilot members used to fit the control-variate coefficients
PILOT_SIZE = 2000
#: Gaussian truncation used by the controlled F_β statistic
CONTROL_TOL = 1e-9


def _controlled_fbeta(cfg: ExperimentConfig, beta: int, rho: TestFunction, details: dict):
    spec = cfg.ensemble
    f = rho.primal_slots[0] if rho.k1 == 1 else None
    if spec.kind != "hecke" or rho.k1 != 1 or rho.k2 != 1 or not isinstance(f, transforms.Gaussian):
        raise ConfigError("the F_beta control variate needs a Hecke ensemble and one Gaussian slot on each side")
    try:
        mean_T, mean_T2 = ensembles.hecke_theta_moments(spec.n, spec.p, f.t)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    # pilot draws from an independent stream (the seed is offset, not reused)
    pilot = EnsembleSpec.hecke(spec.n, spec.p, "sampled", PILOT_SIZE, spec.seed + 7919)
    rows = []
    for L in ensembles.members(pilot):
        T = transforms.siegel_sum(L, f) - 1.0
        rows.append((transforms.f_beta_sums(L, [beta], rho, CONTROL_TOL)[0], T - mean_T, T * T - mean_T2))
    Y = np.array(rows)
    A = np.column_stack([np.ones(len(Y)), Y[:, 1], Y[:, 2]])
    coef, *_ = np.linalg.lstsq(A, Y[:, 0], rcond=None)
    details.update({"control_means": [mean_T, mean_T2], "control_coefficients": [float(coef[1]), float(coef[2])], "pilot_seed": pilot.seed})
    return ControlledFBeta(beta, rho, CONTROL_TOL, float(coef[1]), float(coef[2]), mean_T, mean_T2)


def _run_moments(cfg: ExperimentConfig):
    V = tuple(float(v) for v in cfg.options.get("V", [1.0]))
    W = tuple(float(v) for v in cfg.options.get("W", []))
    try:
        target = rhs.moment_rhs(V, W)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    # the limit holds as n → ∞ only; no tail can be attached at fixed n
    return MomentStatistic(V, W), TruncatedValue(target, 0.0, 0, rigorous=False), {"limit_only": True}


def _run_weights(cfg: ExperimentConfig):
    opts = cfg.options
    theta = opts.get("theta", [[1]])
    q = int(opts.get("q", 2))
    tv, exact = weights.linalg_identity_check(intlin.intmat(theta), q, cfg.n, cfg.Dmax)
    lhs = _exact(tv.value)
    return lhs, TruncatedValue(float(exact), tv.tail_bound, tv.cutoff), {"exact": str(exact)}


def _run_selftest(cfg: ExperimentConfig):
    counts = selftest()
    passed = sum(c[0] for c in counts.values())
    total = sum(c[1] for c in counts.values())
    return _exact(float(passed)), TruncatedValue(float(total), 0.0, 0), {"suites": counts}


_LHS_RUNNERS = {
    "siegel": _run_siegel,
    "rogers": _run_rogers,
    "dual": _run_dual,
    "fbeta": _run_fbeta,
    "moments": _run_moments,
}


def manifest_for(cfg: ExperimentConfig) -> dict:
    return {
        "seed": cfg.seed,
        "code_version": __version__,
        "timestamp": datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S.%fZ"),
        "membership_tol": MEMBERSHIP_TOL,
        "workers": worker_count(),
        "config": cfg.to_dict(),
    }


def run_experiment(config: ExperimentConfig, keep_values: bool = True) -> RunReport:
    """Compute the configured LHS and RHS and compare them."""
    t0 = time.perf_counter()
    manifest = manifest_for(config)
    try:
        if config.kind in _LHS_RUNNERS:
            statistic, target, details = _LHS_RUNNERS[config.kind](config)
            lhs = _estimate(config.ensemble, statistic, keep_values)
        elif config.kind == "weights":
            lhs, target, details = _run_weights(config)
        else:
            lhs, target, details = _run_selftest(config)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    z, verdict = compare(lhs, target, config.tolerance)
    values = lhs.values
    lhs = replace(lhs, values=None)
    return RunReport(config, lhs, target, z, verdict, time.perf_counter() - t0, manifest, details, values)


def write_artifacts(report: RunReport, out_dir=None) -> Path:
    """Write ``report.json``, ``manifest.json`` and ``members.csv`` into a fresh run directory."""
    base = Path(out_dir if out_dir is not None else report.config.output_dir)
    stamp = report.manifest["timestamp"]
    run = base / f"run-{stamp}-{report.config.seed}"
    suffix = 0
    while run.exists():
        suffix += 1
        run = base / f"run-{stamp}-{report.config.seed}-{suffix}"
    run.mkdir(parents=True)
    (run / "report.json").write_text(json.dumps(report.to_dict(), indent=2, default=_json_default))
    (run / "manifest.json").write_text(json.dumps(report.manifest, indent=2, default=_json_default))
    if report.values is not None:
        with open(run / "members.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["member_index", "statistic_value"])
            for i, v in enumerate(report.values):
                w.writerow([i, repr(float(v))])
    return run


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def replay(manifest: dict) -> RunReport:
    """Re-run the experiment recorded in a manifest."""
    return run_experiment(ExperimentConfig.from_dict(manifest["config"]))


# ---------------------------------------------------------------------------
# self test: exact kernels against brute force on small boxes


def _brute_det(M):
    M = [list(map(int, r)) for r in M]
    n = len(M)
    if n == 0:
        return 1
    if n == 1:
        return M[0][0]
    return sum((-1) ** j * M[0][j] * _brute_det([r[:j] + r[j + 1 :] for r in M[1:]]) for j in range(n))


def _brute_minor_gcd(M, r):
    import itertools

    g = 0
    rows, cols = len(M), len(M[0])
    for R in itertools.combinations(range(rows), r):
        for C in itertools.combinations(range(cols), r):
            g = math.gcd(g, _brute_det([[M[i][j] for j in C] for i in R]))
    return g


def selftest(samples: int = 300, seed: int = 0) -> dict:
    """Check Smith, Hermite, canonical-form and congruence kernels; returns ``{suite: (passed, total)}``."""
    rng = np.random.default_rng(seed)
    out = {}

    ok = tot = 0
    for _ in range(samples):
        r, c = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        A = rng.integers(-4, 5, size=(r, c))
        sd = intlin.smith(intlin.intmat(A))
        good = np.array_equal((sd.U @ sd.D @ sd.V).astype(np.int64), A)
        prod = 1
        for i, d in enumerate(sd.divisors):
            prod *= int(d)
            good &= prod == _brute_minor_gcd(A.tolist(), i + 1)
        ok += bool(good)
        tot += 1
    out["smith"] = (ok, tot)

    ok = tot = 0
    for _ in range(samples):
        r, c = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        A = rng.integers(-4, 5, size=(r, c))
        H, T, piv = intlin.hermite_rows(intlin.intmat(A))
        good = np.array_equal((T @ intlin.intmat(A)).astype(np.int64), H.astype(np.int64)) and abs(intlin.det(T)) == 1
        ok += bool(good)
        tot += 1
    out["hermite"] = (ok, tot)

    ok = tot = 0
    for _ in range(samples):
        k = int(rng.integers(2, 4))
        v = rng.integers(-4, 5, size=k)
        if not v.any():
            continue
        g = math.gcd(*map(int, v))
        ok += bool(intlin.is_primitive(intlin.intmat(v)) == (g == 1))
        tot += 1
    out["primitivity"] = (ok, tot)

    ok = tot = 0
    for q in range(2, 7):
        for a in range(q):
            for b in range(q):
                theta = intlin.intmat([[a], [b]])
                brute = sum(1 for x in range(q) for y in range(q) if (a * x + b * y) % q == 0)
                ok += bool(intlin.congruence_count(theta, q) == brute)
                tot += 1
    out["congruence"] = (ok, tot)
    return out
