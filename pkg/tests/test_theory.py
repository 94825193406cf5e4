import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdci.theory import (
    COROLLARY_CROSSOVER_KAPPA,
    TheoryConstants,
    bound_at,
    bound_curve,
    check_admissible,
    corollary_neighbourhood,
    corollary_regime,
)


def random_tuples(count, seed):
    rng = np.random.default_rng(seed)
    mu = 10 ** rng.uniform(-3, 1, count)
    L = mu * 10 ** rng.uniform(0, 3, count)
    gamma = rng.uniform(0.01, 1.0, count) / L
    omega = 10 ** rng.uniform(-6, 0, count)
    return L, mu, gamma, omega


class TestConstants:
    def test_hand_evaluated_bound(self):
        c = TheoryConstants.build(1.0, 1.0, 0.25, 1e-3, 1.0)
        assert bound_at(0, c, 1.0) == pytest.approx(1.034, rel=1e-14)

    def test_zero_omega_is_plain_gd(self):
        L, mu = 10.0, 1.0
        c = TheoryConstants.build(L, mu, 1 / (4 * L), 0.0, 5.0)
        assert c.beta == c.B == c.D == c.neighbourhood == 0.0
        for k in (0, 1, 10, 500):
            assert bound_at(k, c, 2.0) == pytest.approx((1 - mu / (4 * L)) ** k * 2.0, rel=1e-12)
        assert bound_at(10_000, c, 2.0) < 1e-100

    def test_nonnegative(self):
        for L, mu, g, w in zip(*random_tuples(1000, 1)):
            c = TheoryConstants.build(L, mu, g, w, 3.0)
            assert min(c.alpha, c.beta, c.A, c.B, c.D, c.neighbourhood) >= 0

    def test_neighbourhood_formulas_agree(self):
        rng = np.random.default_rng(2)
        for L, mu, g, w in zip(*random_tuples(10_000, 3)):
            c = TheoryConstants.build(L, mu, g, w, rng.uniform(0, 100))
            assert c.neighbourhood == pytest.approx(c.neighbourhood_closed_form, rel=1e-12, abs=0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            TheoryConstants.build(1.0, 2.0, 0.1, 0.0, 1.0)
        with pytest.raises(ValueError):
            TheoryConstants.build(1.0, 1.0, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            TheoryConstants.build(1.0, 1.0, 0.1, -1.0, 1.0)

    def test_bound_curve_matches_pointwise(self):
        c = TheoryConstants.build(10.0, 1.0, 0.025, 1e-3, 2.0)
        ks = np.arange(0, 100, 7)
        np.testing.assert_allclose(bound_curve(ks, c, 4.0), [bound_at(k, c, 4.0) for k in ks], rtol=1e-14)


class TestCorollaryNeighbourhood:
    def test_formula_on_random_tuples(self):
        rng = np.random.default_rng(4)
        for _ in range(10_000):
            mu = 10 ** rng.uniform(-3, 1)
            L = mu * 10 ** rng.uniform(0, 3)
            omega = 10 ** rng.uniform(-6, 0)
            r = 10 ** rng.uniform(-2, 3)
            c = TheoryConstants.build(L, mu, 1 / (4 * L), omega, r)
            assert corollary_neighbourhood(omega, L / mu, r) == pytest.approx(c.neighbourhood_closed_form, rel=1e-12)


class TestAdmissibility:
    def test_zero_omega(self):
        rep = check_admissible(10.0, 1.0, 1 / 40, 0.0)
        assert rep.admissible and rep.lhs == 0 and rep.rhs > 0

    def test_step_boundary(self):
        rep = check_admissible(10.0, 1.0, 1 / 20, 1e-9)
        assert rep.rhs == 0 and not rep.admissible and not rep.proof_form_admissible

    def test_large_step(self):
        rep = check_admissible(10.0, 1.0, 1.0, 0.0)
        assert not rep.step_ok and not rep.admissible and rep.omega_max == 0.0

    def test_hand_example(self):
        rep = check_admissible(1.0, 0.5, 0.25, 0.0)
        assert rep.rhs == pytest.approx(0.5 / 9, rel=1e-14)
        assert rep.omega_max == pytest.approx(0.5 * (0.5 / 9) / 4, rel=1e-14)
        assert rep.omega_max == pytest.approx(0.006944, abs=1e-6)
        assert check_admissible(1.0, 0.5, 0.25, 0.00694).admissible
        assert not check_admissible(1.0, 0.5, 0.25, 0.00695).admissible

    def test_rhs_positive_below_half_inverse_L(self):
        for L, mu, g, w in zip(*random_tuples(1000, 5)):
            g = min(g, 0.499 / L)
            assert check_admissible(L, mu, g, w).rhs > 0

    def test_proof_form_is_alpha_below_rhs(self):
        for L, mu, g, w in zip(*random_tuples(10_000, 6)):
            rep = check_admissible(L, mu, g, w)
            alpha = 2 * w / mu
            if abs(alpha - rep.rhs) > 1e-9 * rep.rhs:
                assert rep.proof_form_admissible == (rep.step_ok and alpha <= rep.rhs)

    def test_primary_form_implies_proof_form(self):
        for L, mu, g, w in zip(*random_tuples(10_000, 7)):
            rep = check_admissible(L, mu, g, w)
            if rep.admissible:
                assert rep.proof_form_admissible

    def test_forms_differ_between_thresholds(self):
        # between mu rhs / 4 and mu rhs / 2 only the proof form admits
        rep = check_admissible(1.0, 0.5, 0.25, 0.0)
        mid = 0.5 * (rep.omega_max + rep.omega_max_proof_form)
        between = check_admissible(1.0, 0.5, 0.25, mid)
        assert between.proof_form_admissible and not between.admissible
        assert rep.omega_max_proof_form == pytest.approx(2 * rep.omega_max)

    @given(
        L=st.floats(0.01, 100),
        ratio=st.floats(1.0, 1000),
        frac=st.floats(0.01, 0.49),
        w1=st.floats(0, 1),
        w2=st.floats(0, 1),
    )
    @settings(max_examples=300, deadline=None)
    def test_admissibility_monotone_in_omega(self, L, ratio, frac, w1, w2):
        mu = L / ratio
        lo, hi = sorted((w1, w2))
        if check_admissible(L, mu, frac / L, hi).admissible:
            assert check_admissible(L, mu, frac / L, lo).admissible


class TestMonotonicity:
    @given(k1=st.integers(0, 10_000), k2=st.integers(0, 10_000), omega=st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_bound_nonincreasing_in_k(self, k1, k2, omega):
        c = TheoryConstants.build(10.0, 1.0, 0.025, omega, 3.0)
        lo, hi = sorted((k1, k2))
        assert bound_at(hi, c, 7.0) <= bound_at(lo, c, 7.0)
        assert bound_at(hi, c, 7.0) >= c.neighbourhood_closed_form

    def test_bound_converges_to_neighbourhood(self):
        c = TheoryConstants.build(10.0, 1.0, 0.025, 1e-3, 3.0)
        assert bound_at(20_000, c, 7.0) == pytest.approx(c.neighbourhood_closed_form, rel=1e-15)

    @given(w1=st.floats(0, 1), w2=st.floats(0, 1), k1=st.floats(1, 1e4), k2=st.floats(1, 1e4))
    @settings(max_examples=200, deadline=None)
    def test_neighbourhood_monotone_in_omega_and_kappa(self, w1, w2, k1, k2):
        mu = 0.5

        def nb(w, kappa):
            L = kappa * mu
            return TheoryConstants.build(L, mu, 1 / (4 * L), w, 2.0).neighbourhood

        (wl, wh), (kl, kh) = sorted((w1, w2)), sorted((k1, k2))
        assert nb(wl, kl) <= nb(wh, kl) * (1 + 1e-12)
        assert nb(wl, kl) <= nb(wl, kh) * (1 + 1e-12)


class TestCorollaryRegime:
    def test_kappa_one(self):
        reg = corollary_regime(1.0, 1.0)
        assert reg.omega_max_derived == pytest.approx(1 / 68)
        assert reg.omega_max_claimed == pytest.approx(1 / 73)
        assert reg.claimed_is_admissible and not reg.discrepancy
        assert reg.gamma == 0.25

    def test_kappa_161(self):
        reg = corollary_regime(161 * 0.02, 0.02)
        assert reg.omega_max_claimed == pytest.approx(8.5e-5, rel=0.01)
        assert reg.omega_max_derived == pytest.approx(8.18e-5, rel=0.001)
        assert reg.omega_max_claimed > reg.omega_max_derived
        assert reg.discrepancy

    def test_crossover(self):
        k = COROLLARY_CROSSOVER_KAPPA
        assert 73 * k == pytest.approx(76 * k - 8)
        reg = corollary_regime(k, 1.0)
        assert reg.omega_max_claimed == pytest.approx(reg.omega_max_derived, rel=1e-12)
        assert corollary_regime(2.5, 1.0).claimed_is_admissible
        assert corollary_regime(2.8, 1.0).discrepancy

    def test_derived_threshold_is_admissibility_boundary(self):
        for kappa in (1.0, 3.0, 18.0, 161.0):
            reg = corollary_regime(kappa, 1.0)
            assert check_admissible(kappa, 1.0, reg.gamma, reg.omega_max_derived * (1 - 1e-9)).admissible
            assert not check_admissible(kappa, 1.0, reg.gamma, reg.omega_max_derived * (1 + 1e-9)).admissible
            assert reg.omega_max_proof_form == pytest.approx(1 / (38 * kappa - 4))

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            corollary_regime(0.5, 1.0)
