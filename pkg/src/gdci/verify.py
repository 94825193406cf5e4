"""Executable checks of the inequalities behind the GDCI convergence proof.

Each check evaluates ``lhs <= rhs`` where either side may contain an
expectation over compression draws.  For operators with at most 16 outcomes
the expectation is computed exactly by enumeration; otherwise it is a
Monte-Carlo average and the check tolerates ``4`` standard errors of the
paired difference ``rhs - lhs``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .compression import RngStream, as_generator
from .objectives import Objective, OptimumCertificate
from .theory import TheoryConstants, check_admissible

STANDARD_ERRORS = 4.0
EXACT_OUTCOME_LIMIT = 16
# absorbs float rounding when both sides agree analytically
_FP_SLACK = 1e-12

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


@dataclass
class InequalityCheck:
    name: str
    sample_count: int
    worst_margin: float
    standard_error: float
    passed: bool
    exact: bool
    status: str
    trials: int = 0
    components: dict = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


class _Accumulator:
    """Tracks the worst trial of one named inequality."""

    def __init__(self):
        self.trials = 0
        self.worst = np.inf
        self.worst_se = 0.0
        self.passed = True

    def add(self, weights, lhs, rhs, exact, rhs_scale):
        lhs = np.broadcast_to(np.asarray(lhs, dtype=float), weights.shape)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), weights.shape) * rhs_scale
        diff = rhs - lhs
        margin = float(weights @ diff)
        if exact:
            se = 0.0
        else:
            se = float(np.std(diff, ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
        slack = STANDARD_ERRORS * se + _FP_SLACK * (1.0 + float(weights @ np.abs(lhs)) + float(weights @ np.abs(rhs)))
        ok = margin >= -slack
        self.passed &= ok
        self.trials += 1
        if margin < self.worst:
            self.worst, self.worst_se = margin, se


def _draws(op, x, samples, rng, limit=EXACT_OUTCOME_LIMIT):
    """Outcomes of C(x) with their weights; exact when the support is small."""
    outcomes = getattr(op, "outcomes", None)
    if outcomes is not None and limit > 0:
        try:
            atoms = outcomes(x, limit=limit)
        except ValueError:
            atoms = None
        if atoms is not None:
            w = np.array([a[0] for a in atoms])
            Y = np.stack([a[1] for a in atoms])
            return w, Y, True
    Y, _ = op.sample(x, rng, samples)
    return np.full(samples, 1.0 / samples), Y, False


def _finish(name, accs: dict[str, _Accumulator], samples, exact_all, detail="") -> InequalityCheck:
    worst_key = min(accs, key=lambda k: accs[k].worst)
    worst = accs[worst_key]
    passed = all(a.passed for a in accs.values())
    comps = {
        k: {"worst_margin": float(a.worst), "standard_error": float(a.worst_se), "pass": bool(a.passed), "trials": a.trials}
        for k, a in accs.items()
    }
    return InequalityCheck(
        name=name,
        sample_count=1 if exact_all else samples,
        worst_margin=float(worst.worst),
        standard_error=float(worst.worst_se),
        passed=bool(passed),
        exact=exact_all,
        status=PASS if passed else FAIL,
        trials=sum(a.trials for a in accs.values()),
        components=comps,
        detail=detail,
    )


def _require_optimum(optimum):
    if optimum is None:
        raise ValueError("this check needs an optimum certificate for x* and f(x*)")


def _sqnorm(a):
    return np.sum(a * a, axis=-1)


def check_lemma1(
    obj: Objective, op, probes, samples: int, rng, optimum: OptimumCertificate,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """E||C(x) - x||^2 <= 2 alpha (f(x) - f*) + beta."""
    _require_optimum(optimum)
    gen = as_generator(rng)
    alpha = 2.0 * op.omega / obj.strong_convexity
    beta = 2.0 * op.omega * optimum.x_star_sq_norm
    acc = _Accumulator()
    exact_all = True
    for x in probes:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        rhs = 2.0 * alpha * (obj.value(x) - optimum.f_star) + beta
        acc.add(w, _sqnorm(Y - x), rhs, exact, rhs_scale)
    return _finish("lemma1_variance_vs_gap", {"variance_bound": acc}, samples, exact_all)


def check_lemma2(
    obj: Objective, op, probe_pairs, samples: int, rng,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """Gradient-difference bound and both halves of the Jensen/smoothness sandwich."""
    gen = as_generator(rng)
    L = obj.smoothness
    accs = {"gradient_difference": _Accumulator(), "jensen_lower": _Accumulator(), "smoothness_upper": _Accumulator()}
    exact_all = True
    for x, y in probe_pairs:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        dsq = _sqnorm(Y - x)
        gy = obj.gradient(y)
        xy = float(_sqnorm(x - y))
        accs["gradient_difference"].add(w, _sqnorm(obj.gradient(Y) - gy), L**2 * (xy + dsq), exact, rhs_scale)
        fY = obj.value(Y)
        accs["jensen_lower"].add(w, obj.value(x), fY, exact, rhs_scale)
        upper = obj.value(y) + gy @ (x - y) + 0.5 * L * xy + 0.5 * L * dsq
        accs["smoothness_upper"].add(w, fY, upper, exact, rhs_scale)
    return _finish("lemma2_smoothness_extensions", accs, samples, exact_all)


def check_lemma3(
    obj: Objective, op, gamma: float, probe_pairs, samples: int, rng,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """E||delta/gamma - grad f(x + delta)||^2 <= 2||grad f(y)||^2 + 2L^2||x-y||^2 + 2(L^2 + 1/gamma^2) E||delta||^2."""
    gen = as_generator(rng)
    L = obj.smoothness
    acc = _Accumulator()
    exact_all = True
    for x, y in probe_pairs:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        delta = Y - x
        lhs = _sqnorm(delta / gamma - obj.gradient(Y))
        rhs = 2.0 * _sqnorm(obj.gradient(y)) + 2.0 * L**2 * _sqnorm(x - y) + 2.0 * (L**2 + 1.0 / gamma**2) * _sqnorm(delta)
        acc.add(w, lhs, rhs, exact, rhs_scale)
    return _finish("lemma3_scaled_error", {"scaled_error": acc}, samples, exact_all)


def check_lemma4(
    obj: Objective, op, probe_pairs, samples: int, rng,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """f(y) >= f(x) + <E grad f(x + delta), y - x> + mu/2 ||y - x||^2 - (L - mu)/2 E||delta||^2."""
    gen = as_generator(rng)
    L, mu = obj.smoothness, obj.strong_convexity
    acc = _Accumulator()
    exact_all = True
    for x, y in probe_pairs:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        lhs = obj.value(x) + obj.gradient(Y) @ (y - x) + 0.5 * mu * _sqnorm(y - x) - 0.5 * (L - mu) * _sqnorm(Y - x)
        acc.add(w, lhs, obj.value(y), exact, rhs_scale)
    return _finish("lemma4_compressed_strong_convexity", {"strong_convexity": acc}, samples, exact_all)


def check_lemma5(
    obj: Objective, op, gamma: float, probes, samples: int, rng, optimum: OptimumCertificate,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """E||delta/gamma - grad f(x + delta)||^2 <= 4A (f(x) - f*) + 2B."""
    _require_optimum(optimum)
    gen = as_generator(rng)
    c = TheoryConstants.build(obj.smoothness, obj.strong_convexity, gamma, op.omega, optimum.x_star_sq_norm)
    acc = _Accumulator()
    exact_all = True
    for x in probes:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        lhs = _sqnorm((Y - x) / gamma - obj.gradient(Y))
        rhs = 4.0 * c.A * (obj.value(x) - optimum.f_star) + 2.0 * c.B
        acc.add(w, lhs, rhs, exact, rhs_scale)
    return _finish("lemma5_expected_smoothness", {"expected_smoothness": acc}, samples, exact_all)


def check_onestep_recursion(
    obj: Objective, op, gamma: float, probes, samples: int, rng, optimum: OptimumCertificate,
    rhs_scale: float = 1.0,
    exact_limit: int = EXACT_OUTCOME_LIMIT,
):
    """E[||x+ - x*||^2 | x] <= (1 - gamma mu)||x - x*||^2 + D under admissibility."""
    _require_optimum(optimum)
    L, mu = obj.smoothness, obj.strong_convexity
    adm = check_admissible(L, mu, gamma, op.omega)
    if not adm.admissible:
        return InequalityCheck(
            "onestep_recursion", 0, float("nan"), float("nan"), False, False, SKIPPED,
            detail=f"inadmissible: 4 omega/mu = {adm.lhs:.6g} > {adm.rhs:.6g} or gamma > 1/(2L)",
        )
    gen = as_generator(rng)
    c = TheoryConstants.build(L, mu, gamma, op.omega, optimum.x_star_sq_norm)
    acc = _Accumulator()
    exact_all = True
    for x in probes:
        w, Y, exact = _draws(op, x, samples, gen, exact_limit)
        exact_all &= exact
        nxt = Y - gamma * obj.gradient(Y)
        rhs = c.contraction * _sqnorm(x - optimum.x_star) + c.D
        acc.add(w, _sqnorm(nxt - optimum.x_star), rhs, exact, rhs_scale)
    return _finish("onestep_recursion", {"descent": acc}, samples, exact_all)


# -- probe construction -----------------------------------------------------

PROBE_SCALES = (0.1, 1.0, 10.0)


def make_probes(dim: int, x_star, rng, per_scale: int = 1, scales=PROBE_SCALES) -> list[np.ndarray]:
    """Standard-normal points at several magnitudes around 0 and around x*."""
    gen = as_generator(rng)
    x_star = np.zeros(dim) if x_star is None else np.asarray(x_star, dtype=float)
    probes = []
    for center in (np.zeros(dim), x_star):
        for s in scales:
            for _ in range(per_scale):
                probes.append(center + s * gen.standard_normal(dim))
    return probes


def make_pairs(probes, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """For each x: (x, x), (x, another probe), (x, x + small perturbation)."""
    gen = as_generator(rng)
    pairs = []
    m = len(probes)
    for i, x in enumerate(probes):
        pairs.append((x, x))
        if m > 1:
            j = (i + 1 + int(gen.integers(m - 1))) % m
            pairs.append((x, probes[j]))
        pairs.append((x, x + 0.1 * gen.standard_normal(x.shape[0])))
    return pairs


@dataclass
class LemmaSuite:
    """Everything needed to run the six checks on one instance."""

    objective: Objective
    optimum: OptimumCertificate
    operator: object
    gamma: float
    onestep_operator: object
    samples: int = 100_000
    seed: int = 0
    per_scale: int = 1


def run_suite(suite: LemmaSuite, rhs_scale: float = 1.0) -> list[InequalityCheck]:
    """Run all six checks, each on its own substream of ``suite.seed``."""
    base = RngStream(suite.seed, 0)
    obj, opt = suite.objective, suite.optimum
    probes = make_probes(obj.dim, opt.x_star, base.child(0).generator(), per_scale=suite.per_scale)
    pairs = make_pairs(probes, base.child(1).generator())
    n = suite.samples
    op, g = suite.operator, suite.gamma
    return [
        check_lemma1(obj, op, probes, n, base.child(2).generator(), opt, rhs_scale),
        check_lemma2(obj, op, pairs, n, base.child(3).generator(), rhs_scale),
        check_lemma3(obj, op, g, pairs, n, base.child(4).generator(), rhs_scale),
        check_lemma4(obj, op, pairs, n, base.child(5).generator(), rhs_scale),
        check_lemma5(obj, op, g, probes, n, base.child(6).generator(), opt, rhs_scale),
        check_onestep_recursion(obj, suite.onestep_operator, g, probes, n, base.child(7).generator(), opt, rhs_scale),
    ]
