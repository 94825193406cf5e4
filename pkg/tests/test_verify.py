import numpy as np
import pytest

from gdci.compression import RngStream, identity, random_sparsification, sparsification_for_omega
from gdci.data import synthetic_logistic
from gdci.objectives import LogisticObjective, QuadraticObjective, solve_optimum
from gdci.theory import check_admissible
from gdci.verify import (
    LemmaSuite,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    check_lemma4,
    check_lemma5,
    check_onestep_recursion,
    make_pairs,
    make_probes,
    run_suite,
)

HALF = random_sparsification(0.5)


def half_square():
    obj = QuadraticObjective([1.0])
    return obj, solve_optimum(obj, 1e-12)


def small_logistic():
    obj = LogisticObjective.from_dataset(synthetic_logistic(30, 3, 2.0, rng=5), 0.1)
    return obj, solve_optimum(obj, 1e-10)


def two_scale_quadratic():
    obj = QuadraticObjective([1.0, 10.0], [1.0, -0.5])
    return obj, solve_optimum(obj, 1e-13)


def suite_for(obj, opt, op, samples=20_000, seed=0):
    L, mu = obj.smoothness, obj.strong_convexity
    gamma = 1 / (4 * L)
    onestep = sparsification_for_omega(0.5 * check_admissible(L, mu, gamma, 0.0).omega_max)
    return LemmaSuite(obj, opt, op, gamma, onestep, samples=samples, seed=seed)


class TestIdentityIsDeterministic:
    @pytest.mark.parametrize("factory", [half_square, small_logistic, two_scale_quadratic])
    def test_all_exact_pass(self, factory):
        obj, opt = factory()
        suite = suite_for(obj, opt, identity())
        suite.onestep_operator = identity()
        for check in run_suite(suite):
            assert check.passed and check.exact and check.sample_count == 1, check
            assert check.standard_error == 0.0

    def test_lemma1_lhs_zero(self):
        obj, opt = small_logistic()
        probes = make_probes(3, opt.x_star, np.random.default_rng(0))
        check = check_lemma1(obj, identity(), probes, 10, 0, opt)
        assert check.passed and check.worst_margin >= 0

    def test_lemma3_reduces_to_gradient_doubling(self):
        obj, _ = small_logistic()
        x = np.array([0.3, -1.0, 2.0])
        check = check_lemma3(obj, identity(), 0.5, [(x, x)], 10, 0)
        g = obj.gradient(x)
        assert check.worst_margin == pytest.approx(g @ g, rel=1e-12)

    def test_lemma5_at_optimum(self):
        obj, opt = small_logistic()
        check = check_lemma5(obj, identity(), 0.1, [opt.x_star], 10, 0, opt)
        assert check.passed and abs(check.worst_margin) < 1e-18

    def test_onestep_no_neighbourhood(self):
        obj, opt = two_scale_quadratic()
        probes = make_probes(2, opt.x_star, np.random.default_rng(1))
        assert check_onestep_recursion(obj, identity(), 1 / 40, probes, 10, 0, opt).passed


class TestExactExamples:
    def test_lemma1_closed_form(self):
        obj, opt = half_square()
        check = check_lemma1(obj, HALF, [np.array([2.0])], 10, 0, opt)
        # lhs = omega * 4 = 4, rhs = 2 * (2 omega / mu) * f(2) = 8
        assert check.exact and check.worst_margin == pytest.approx(4.0)

    def test_lemma3_two_outcomes(self):
        obj, _ = half_square()
        pairs = [(np.array([1.0]), np.array([0.5])), (np.array([-3.0]), np.array([2.0]))]
        check = check_lemma3(obj, HALF, 0.25, pairs, 10, 0)
        assert check.passed and check.exact

    def test_lemma4_isotropic(self):
        obj = QuadraticObjective([2.0, 2.0], [1.0, 0.0])
        probes = make_probes(2, obj.center, np.random.default_rng(2))
        check = check_lemma4(obj, HALF, make_pairs(probes, np.random.default_rng(3)), 10, 0)
        assert check.passed and check.exact

    def test_lemma5_two_outcomes(self):
        obj, opt = half_square()
        probes = [np.array([v]) for v in (-5.0, 0.1, 1.0, 7.0)]
        check = check_lemma5(obj, HALF, 0.25, probes, 10, 0, opt)
        assert check.passed and check.exact

    def test_onestep_tiny_omega(self):
        obj = QuadraticObjective([1.0], [2.0])
        opt = solve_optimum(obj, 1e-300)
        gamma = 0.25
        op = sparsification_for_omega(0.5 * check_admissible(1.0, 1.0, gamma, 0.0).omega_max)
        probes = [np.array([v]) for v in (-10.0, 0.0, 1.9, 2.0, 30.0)]
        check = check_onestep_recursion(obj, op, gamma, probes, 10, 0, opt)
        assert check.passed and check.exact

    def test_two_scale_suite_exact(self):
        obj, opt = two_scale_quadratic()
        for check in run_suite(suite_for(obj, opt, random_sparsification(0.25))):
            assert check.passed and check.exact, check


def test_lemma2_anisotropic_monte_carlo():
    obj, opt = two_scale_quadratic()
    rng = np.random.default_rng(4)
    pairs = [(rng.standard_normal(2) * s, rng.standard_normal(2) * s) for s in np.repeat([0.1, 1.0, 10.0], 34)][:100]
    check = check_lemma2(obj, random_sparsification(0.25), pairs, 100_000, RngStream(5), exact_limit=0)
    assert check.passed and not check.exact and check.sample_count == 100_000
    assert set(check.components) == {"gradient_difference", "jensen_lower", "smoothness_upper"}
    assert check.trials == 300


def test_forced_monte_carlo_matches_exact_verdicts():
    obj, opt = small_logistic()
    suite = suite_for(obj, opt, HALF, samples=20_000)
    exact = run_suite(suite)
    probes = make_probes(3, opt.x_star, np.random.default_rng(6))
    mc = check_lemma1(obj, HALF, probes, 20_000, RngStream(7), opt, exact_limit=0)
    assert exact[0].exact and not mc.exact
    assert exact[0].passed and mc.passed


def test_onestep_skipped_when_inadmissible():
    obj, opt = two_scale_quadratic()
    check = check_onestep_recursion(obj, random_sparsification(0.5), 1 / 40, [np.ones(2)], 10, 0, opt)
    assert check.status == "skipped" and not check.passed
    assert "inadmissible" in check.detail


@pytest.mark.parametrize("fn", [check_lemma1, check_lemma5, check_onestep_recursion])
def test_missing_optimum(fn):
    obj, _ = half_square()
    args = (obj, HALF, [np.ones(1)], 10, 0, None) if fn is check_lemma1 else (obj, HALF, 0.25, [np.ones(1)], 10, 0, None)
    with pytest.raises(ValueError):
        fn(*args)


def test_probe_layout():
    x_star = np.array([5.0, 5.0])
    probes = make_probes(2, x_star, np.random.default_rng(0), per_scale=2)
    assert len(probes) == 12
    pairs = make_pairs(probes, np.random.default_rng(1))
    assert any(np.array_equal(x, y) for x, y in pairs)
    assert any(not np.array_equal(x, y) for x, y in pairs)


class TestNegativeControl:
    def test_exact_instances_all_fail(self):
        obj, opt = two_scale_quadratic()
        checks = run_suite(suite_for(obj, opt, random_sparsification(0.25)), rhs_scale=0.1)
        assert [c.status for c in checks] == ["fail"] * 6

    def test_logistic_instance_all_fail(self):
        obj, opt = small_logistic()
        checks = run_suite(suite_for(obj, opt, HALF, samples=5_000), rhs_scale=0.1)
        assert not any(c.passed for c in checks)


def test_more_samples_keep_confident_pass():
    """A pass with margin above 8 standard errors survives 10x samples."""
    obj, opt = small_logistic()
    probes = make_probes(3, opt.x_star, np.random.default_rng(8))
    pairs = make_pairs(probes, np.random.default_rng(9))
    confident = 0
    for fn, args in (
        (check_lemma1, (obj, HALF, probes)),
        (check_lemma3, (obj, HALF, 0.5, pairs)),
        (check_lemma4, (obj, HALF, pairs)),
    ):
        extra = (opt,) if fn is check_lemma1 else ()
        small = fn(*args, 2_000, RngStream(10), *extra, exact_limit=0)
        if small.passed and small.worst_margin > 8 * small.standard_error:
            big = fn(*args, 20_000, RngStream(11), *extra, exact_limit=0)
            assert big.passed
            confident += 1
    assert confident > 0
