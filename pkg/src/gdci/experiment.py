"""Config-driven experiment sweeps, verification runs and operator certification."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import compression as C
from .compression import OperatorSpec, RngStream
from .data import file_sha256, load_libsvm, synthetic_logistic
from .objectives import LogisticObjective, Objective, QuadraticObjective, solve_optimum
from .optimizer import GdciConfig, Trajectory, run
from .theory import TheoryConstants, bound_curve, check_admissible, corollary_regime
from .verify import FAIL, LemmaSuite, run_suite

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "GDCI_OUTPUT_DIR"
QUARTER_INVERSE_L = "quarter-inverse-L"
CSV_COLUMNS = ("curve_id", "seed", "k", "sq_dist", "func_gap", "fired")


class ConfigError(ValueError):
    """Malformed spec, unreadable dataset or hash mismatch."""


def load_yaml(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version}")
    base = Path(path).resolve().parent
    data.setdefault("_base_dir", str(base))
    return data


# -- problems ---------------------------------------------------------------


def _resolve_path(p, base_dir) -> Path:
    p = Path(os.path.expandvars(str(p))).expanduser()
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def build_dataset(cfg: dict, base_dir=None):
    if "synthetic" in cfg:
        s = cfg["synthetic"]
        return synthetic_logistic(int(s["n"]), int(s["d"]), float(s.get("separability", 1.0)), rng=int(s.get("seed", 0)))
    if "path" not in cfg:
        raise ConfigError("dataset needs either 'synthetic' or 'path'")
    path = _resolve_path(cfg["path"], base_dir)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    expected = cfg.get("sha256")
    if expected:
        actual = file_sha256(path)
        if actual != expected.lower():
            raise ConfigError(f"dataset hash mismatch for {path}: expected {expected}, got {actual}")
    try:
        return load_libsvm(path, declared_d=cfg.get("declared_d"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_problem(cfg: dict, mu=None, base_dir=None) -> Objective:
    kind = cfg.get("type", "logistic")
    if kind == "quadratic":
        try:
            return QuadraticObjective(cfg["spectrum"], cfg.get("center"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad quadratic problem: {exc}") from exc
    if kind == "logistic":
        mu = cfg.get("mu", mu)
        if mu is None or not float(mu) > 0:
            raise ConfigError("logistic problem needs mu > 0")
        ds = build_dataset(cfg.get("dataset") or {}, base_dir)
        return LogisticObjective.from_dataset(ds, float(mu))
    raise ConfigError(f"unknown problem type {kind!r}")


def resolve_gamma(policy, L: float) -> float:
    if policy is None or policy == QUARTER_INVERSE_L:
        return 1.0 / (4.0 * L)
    try:
        gamma = float(policy)
    except (TypeError, ValueError):
        raise ConfigError(f"gamma must be a number or {QUARTER_INVERSE_L!r}, got {policy!r}") from None
    if not gamma > 0:
        raise ConfigError("gamma must be positive")
    return gamma


# -- experiment spec --------------------------------------------------------


@dataclass
class ExperimentSpec:
    problem: dict
    sweep: list[float]
    seeds: list[int]
    mu: float | None = None
    gamma: Any = QUARTER_INVERSE_L
    operator: dict = field(default_factory=lambda: {"kind": C.SPARSIFICATION})
    intermittent_q: float | None = 0.1
    omega_interpretation: str = "inner"
    baseline: bool = False
    max_iters: int = 2000
    record_every: int = 10
    divergence_threshold: float = 1e12
    x0: Any = "zeros"
    x0_shared: bool = True
    optimum_tolerance: float = 1e-10
    output_dir: str = "runs/experiment"
    workers: int = 1
    name: str = "experiment"
    base_dir: str | None = None

    def __post_init__(self):
        if not self.sweep:
            raise ConfigError("sweep must list at least one alpha")
        if any(not float(a) > 0 for a in self.sweep):
            raise ConfigError("sweep alphas must be positive")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.omega_interpretation not in ("inner", "effective"):
            raise ConfigError("omega_interpretation must be 'inner' or 'effective'")
        if self.problem.get("type", "logistic") == "logistic":
            mu = self.problem.get("mu", self.mu)
            if mu is None or not float(mu) > 0:
                raise ConfigError("mu must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        data.pop("schema_version", None)
        data.pop("kind", None)
        base_dir = data.pop("_base_dir", None)
        seeds = data.get("seeds")
        if isinstance(seeds, dict):
            data["seeds"] = list(range(int(seeds.get("start", 0)), int(seeds.get("start", 0)) + int(seeds["count"])))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "problem" not in data:
            raise ConfigError("experiment needs a 'problem' section")
        data.setdefault("base_dir", base_dir)
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(load_yaml(path))


@dataclass
class Curve:
    curve_id: str
    alpha: float | None
    omega_target: float
    operator: OperatorSpec


def build_curves(spec: ExperimentSpec, kappa: float) -> list[Curve]:
    curves = []
    if spec.baseline:
        curves.append(Curve("baseline", None, 0.0, C.identity()))
    template = spec.operator.get("kind", C.SPARSIFICATION)
    q = spec.intermittent_q
    for alpha in spec.sweep:
        alpha = float(alpha)
        cid = f"alpha={alpha:g}"
        if template == C.IDENTITY:
            curves.append(Curve(cid, alpha, 0.0, C.identity()))
            continue
        if template != C.SPARSIFICATION:
            raise ConfigError(f"operator template must be identity or random-sparsification, got {template!r}")
        omega = 1.0 / (alpha * kappa)
        inner_omega = omega
        if q is not None and spec.omega_interpretation == "effective":
            if q == 0:
                raise ConfigError("effective interpretation needs q > 0")
            inner_omega = omega / q
        op = C.sparsification_for_omega(inner_omega)
        if q is not None and q < 1.0:
            op = C.intermittent(op, q)
        curves.append(Curve(cid, alpha, omega, op))
    return curves


def _initial_point(spec: ExperimentSpec, dim: int, curve_index: int) -> np.ndarray:
    x0 = spec.x0
    if isinstance(x0, str):
        if x0 != "zeros":
            raise ConfigError(f"x0 must be 'zeros', a list or {{normal: scale, seed: s}}, got {x0!r}")
        return np.zeros(dim)
    if isinstance(x0, dict):
        stream = RngStream(int(x0.get("seed", 0)), 0 if spec.x0_shared else curve_index + 1)
        return float(x0.get("normal", 1.0)) * stream.generator().standard_normal(dim)
    arr = np.asarray(x0, dtype=float)
    if arr.shape != (dim,):
        raise ConfigError(f"x0 has shape {arr.shape}, expected ({dim},)")
    return arr


def _run_task(args):
    obj, config, x0, optimum, seed, stream_id = args
    return run(obj, config, x0, optimum, RngStream(seed, stream_id))


@dataclass
class CurveResult:
    curve: Curve
    constants: TheoryConstants
    admissibility: Any
    x0: np.ndarray
    trajectories: dict[int, Trajectory]
    k: np.ndarray
    mean_sq_dist: np.ndarray
    stderr_sq_dist: np.ndarray
    bound: np.ndarray
    diverged: int

    @property
    def admissible(self) -> bool:
        return bool(self.admissibility.admissible)


@dataclass
class RunReport:
    spec: ExperimentSpec
    L: float
    mu: float
    kappa: float
    gamma: float
    optimum: Any
    curves: list[CurveResult]
    output_dir: Path | None = None

    def curve(self, curve_id: str) -> CurveResult:
        for c in self.curves:
            if c.curve.curve_id == curve_id:
                return c
        raise KeyError(curve_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.spec.name,
            "L": self.L,
            "mu": self.mu,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "optimum": {"f_star": self.optimum.f_star, "x_star_sq_norm": self.optimum.x_star_sq_norm,
                        "grad_norm": self.optimum.grad_norm, "tolerance": self.optimum.tolerance},
            "corollary": corollary_regime(self.L, self.mu).to_dict(),
            "curves": [
                {
                    "curve_id": c.curve.curve_id,
                    "alpha": c.curve.alpha,
                    "omega_target": c.curve.omega_target,
                    "operator": c.curve.operator.to_dict(),
                    "omega": c.curve.operator.omega,
                    "admissibility": c.admissibility.to_dict(),
                    "constants": c.constants.to_dict(),
                    "seeds": sorted(c.trajectories),
                    "diverged": c.diverged,
                    "diverged_seeds": sorted(s for s, t in c.trajectories.items() if t.diverged),
                    "aggregate": {
                        "k": c.k.tolist(),
                        "mean_sq_dist": c.mean_sq_dist.tolist(),
                        "stderr_sq_dist": c.stderr_sq_dist.tolist(),
                        "bound": c.bound.tolist(),
                    },
                }
                for c in self.curves
            ],
        }


def _aggregate(trajs: dict[int, Trajectory]):
    ok = [t for t in trajs.values() if not t.diverged]
    if not ok:
        return np.array([]), np.array([]), np.array([])
    k = ok[0].k
    stack = np.stack([t.sq_dist for t in ok])
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(len(ok)) if len(ok) > 1 else np.zeros_like(mean)
    return k, mean, se


def run_experiment(spec: ExperimentSpec, output_dir=None, write: bool = True) -> RunReport:
    obj = build_problem(spec.problem, spec.mu, spec.base_dir)
    L, mu = obj.smoothness, obj.strong_convexity
    kappa = L / mu
    gamma = resolve_gamma(spec.gamma, L)
    optimum = solve_optimum(obj, spec.optimum_tolerance)
    curves = build_curves(spec, kappa)

    tasks, layout = [], []
    x0s = []
    for ci, curve in enumerate(curves):
        x0 = _initial_point(spec, obj.dim, ci)
        x0s.append(x0)
        cfg = GdciConfig(gamma, spec.max_iters, curve.operator, spec.record_every, spec.divergence_threshold)
        for seed in spec.seeds:
            # streams are keyed by (curve, seed) so scheduling never changes draws
            tasks.append((obj, cfg, x0, optimum, int(seed), ci + 1))
            layout.append((ci, int(seed)))
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * spec.workers))))
    else:
        results = [_run_task(t) for t in tasks]

    per_curve: list[dict[int, Trajectory]] = [dict() for _ in curves]
    for (ci, seed), traj in zip(layout, results):
        per_curve[ci][seed] = traj

    out = []
    for ci, curve in enumerate(curves):
        omega = curve.operator.omega
        adm = check_admissible(L, mu, gamma, omega)
        if not adm.admissible:
            log.warning("curve %s: omega=%.4g is outside the admissible region (4w/mu=%.4g > %.4g)",
                        curve.curve_id, omega, adm.lhs, adm.rhs)
        consts = TheoryConstants.build(L, mu, gamma, omega, optimum.x_star_sq_norm)
        k, mean, se = _aggregate(per_curve[ci])
        d0 = x0s[ci] - optimum.x_star
        r0 = float(d0 @ d0)  # same reduction as the recorded distances
        bound = bound_curve(k, consts, r0) if k.size else np.array([])
        diverged = sum(t.diverged for t in per_curve[ci].values())
        out.append(CurveResult(curve, consts, adm, x0s[ci], per_curve[ci], k, mean, se, bound, diverged))

    report = RunReport(spec, L, mu, kappa, gamma, optimum, out)
    if write:
        target = Path(output_dir or os.environ.get(OUTPUT_DIR_ENV) or _resolve_path(spec.output_dir, None))
        write_outputs(report, target)
    return report


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_outputs(report: RunReport, target: Path) -> None:
    target.mkdir(parents=True, exist_ok=True)
    with open(target / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in report.curves:
            for seed in sorted(c.trajectories):
                t = c.trajectories[seed]
                for j in range(len(t)):
                    w.writerow((c.curve.curve_id, seed, int(t.k[j]), _fmt(t.sq_dist[j]), _fmt(t.func_gap[j]), int(t.fired[j])))
    with open(target / "bounds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("curve_id", "k", "bound", "mean_sq_dist", "stderr", "admissible"))
        for c in report.curves:
            for j in range(len(c.k)):
                w.writerow((c.curve.curve_id, int(c.k[j]), _fmt(c.bound[j]), _fmt(c.mean_sq_dist[j]),
                            _fmt(c.stderr_sq_dist[j]), int(c.admissible)))
    with open(target / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    report.output_dir = target


def read_trajectories(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def final_plateau(curve: CurveResult, fraction: float = 0.25) -> float:
    """Mean squared distance averaged over the last ``fraction`` of recorded iterates."""
    m = curve.mean_sq_dist
    if m.size == 0:
        return float("nan")
    start = int(np.floor((1.0 - fraction) * m.size))
    return float(m[min(start, m.size - 1):].mean())


def bound_violations(curve: CurveResult, standard_errors: float = 3.0) -> np.ndarray:
    """Recorded ks where the mean exceeds the bound by more than the allowed slack.

    Besides ``standard_errors`` combined standard errors, a relative 1e-12 of
    the bound absorbs rounding where the two agree analytically (k = 0).
    """
    slack = standard_errors * curve.stderr_sq_dist + 1e-12 * np.abs(curve.bound)
    excess = curve.mean_sq_dist - curve.bound - slack
    return curve.k[excess > 0]


# -- verification front-end -------------------------------------------------


def _instance_suite(inst: dict, seed: int, samples: int, base_dir=None) -> LemmaSuite:
    obj = build_problem(inst["problem"], inst.get("mu"), base_dir)
    optimum = solve_optimum(obj, float(inst.get("optimum_tolerance", 1e-12)))
    op = OperatorSpec.from_dict(inst.get("operator", {"kind": C.IDENTITY}))
    gamma = resolve_gamma(inst.get("gamma", QUARTER_INVERSE_L), obj.smoothness)
    if op.kind == C.IDENTITY:
        onestep = op
    else:
        threshold = check_admissible(obj.smoothness, obj.strong_convexity, gamma, 0.0).omega_max
        onestep = C.sparsification_for_omega(float(inst.get("onestep_omega_fraction", 0.5)) * threshold)
    return LemmaSuite(obj, optimum, op, gamma, onestep, samples=int(inst.get("samples", samples)),
                      seed=int(inst.get("seed", seed)), per_scale=int(inst.get("probes_per_scale", 1)))


def run_verification(cfg: dict, negative_control: bool | None = None, output_dir=None) -> dict:
    """Run lemma checks and operator certification for every configured instance."""
    seed = int(cfg.get("seed", 0))
    samples = int(cfg.get("samples", 100_000))
    neg = bool(cfg.get("negative_control", False)) if negative_control is None else negative_control
    rhs_scale = 0.1 if neg else 1.0
    base_dir = cfg.get("_base_dir")
    instances = cfg.get("instances")
    if not instances:
        raise ConfigError("verification config needs a nonempty 'instances' list")
    records = []
    for ii, inst in enumerate(instances):
        try:
            suite = _instance_suite(inst, seed + ii, samples, base_dir)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"instance {ii}: {exc}") from exc
        name = inst.get("name", f"instance-{ii}")
        for check in run_suite(suite, rhs_scale=rhs_scale):
            rec = check.to_dict()
            rec["instance"] = name
            records.append(rec)
        if inst.get("certify", True) and not neg:
            records.extend(_certify_records(name, suite.operator, suite.objective.dim,
                                            int(inst.get("certify_samples", samples)), RngStream(seed + ii, 99)))
    failed = [r for r in records if r["status"] == FAIL]
    report = {
        "schema_version": SCHEMA_VERSION,
        "negative_control": neg,
        "rhs_scale": rhs_scale,
        "records": records,
        "passed": not failed,
        "failures": [f"{r['instance']}:{r['name']}" for r in failed],
    }
    target = output_dir or os.environ.get(OUTPUT_DIR_ENV) or cfg.get("output_dir")
    if target:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        with open(target / "verification.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return report


def _probe_set(dim: int, stream: RngStream, count: int = 3) -> list[np.ndarray]:
    gen = stream.generator()
    probes = [np.ones(dim)]
    probes += [gen.standard_normal(dim) for _ in range(count - 1)]
    return probes


def _certify_records(name, op, dim, samples, stream: RngStream) -> list[dict]:
    probes = _probe_set(dim, stream.child(0))
    unb = C.certify_unbiased(op, probes, samples, stream.child(1))
    var = C.certify_variance(op, probes, samples, stream.child(2))
    return [
        {"instance": name, "name": "certify_unbiased", "status": "pass" if unb.passed else FAIL,
         "passed": unb.passed, "worst_margin": unb.max_deviation, "sample_count": samples,
         "standard_error": unb.max_standard_errors, "exact": False},
        {"instance": name, "name": "certify_variance", "status": "pass" if var.passed else FAIL,
         "passed": var.passed, "worst_margin": var.threshold - var.ratio, "sample_count": samples,
         "ratio": var.ratio, "declared_omega": var.declared_omega, "exact": False},
    ]


def run_certification(cfg: dict, output_dir=None) -> dict:
    """Certify every operator listed under ``operators`` on shared probes."""
    seed = int(cfg.get("seed", 0))
    dim = int(cfg.get("dimension", 10))
    su = int(cfg.get("samples_unbiased", 100_000))
    sv = int(cfg.get("samples_variance", 1_000_000))
    two_sided = cfg.get("two_sided_tolerance")
    ops = cfg.get("operators")
    if not ops:
        raise ConfigError("certification config needs a nonempty 'operators' list")
    probes = _probe_set(dim, RngStream(seed, 0), int(cfg.get("probes", 3)))
    rows = []
    for i, od in enumerate(ops):
        try:
            op = OperatorSpec.from_dict(od)
        except ValueError as exc:
            raise ConfigError(f"operator {i}: {exc}") from exc
        unb = C.certify_unbiased(op, probes, su, RngStream(seed, 2 * i + 1))
        var = C.certify_variance(op, probes, sv, RngStream(seed, 2 * i + 2))
        ok = unb.passed and var.passed
        row = {"operator": op.to_dict(), "unbiased": unb.passed, "max_deviation_se": unb.max_standard_errors,
               "variance_ratio": var.ratio, "declared_omega": var.declared_omega, "variance_pass": var.passed,
               "relative_error": var.relative_error}
        if two_sided is not None:
            row["two_sided_pass"] = var.relative_error <= float(two_sided)
            ok &= row["two_sided_pass"]
        row["pass"] = ok
        rows.append(row)
    report = {"schema_version": SCHEMA_VERSION, "operators": rows, "passed": all(r["pass"] for r in rows)}
    target = output_dir or os.environ.get(OUTPUT_DIR_ENV) or cfg.get("output_dir")
    if target:
        Path(target).mkdir(parents=True, exist_ok=True)
        with open(Path(target) / "certification.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report
