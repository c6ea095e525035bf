import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from scipy.special import gammaln

from dictid import bgmodel as bg
from dictid.errors import PreconditionFailed, UnknownBoundId
from dictid.model import coherence, gram_parts


class TestParams:
    def test_validation(self):
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(PreconditionFailed):
                bg.BGParams(bad, 2, 3)
        with pytest.raises(PreconditionFailed):
            bg.BGParams(0.5, 0, 3)
        with pytest.raises(ValueError):
            bg.BGParams(0.5, 2, 3, seed=-1)

    def test_bound_inputs(self):
        b = bg.BoundInputs(0.3, 4, 1000, 0.1)
        assert b.M_l == pytest.approx(1000 * 0.7 * 0.9)
        assert b.M_u == pytest.approx(1000 * 0.7 * 1.1)
        assert b.M_l <= b.M_u
        c = math.sqrt(2 / math.pi)
        assert b.gamma_n == pytest.approx(300 * (c + 0.1))
        assert b.alpha_n == pytest.approx(1000 * 0.21 * 0.9 * (c - 0.2 - 0.01))
        assert b.beta_n == pytest.approx(300 * math.sqrt((3 / 1000 + 0.1) * (1 + 0.1 / 0.3 - 0.1)))
        with pytest.raises(PreconditionFailed):
            bg.BoundInputs(0.3, 4, 1000, 1.0)


class TestSample:
    def test_deterministic(self):
        a = bg.sample(bg.BGParams(0.5, 3, 50, 7)).X
        b = bg.sample(bg.BGParams(0.5, 3, 50, 7)).X
        assert a.tobytes() == b.tobytes()
        c = bg.sample(bg.BGParams(0.5, 3, 50, 8)).X
        assert a.tobytes() != c.tobytes()

    def test_almost_dense(self):
        X = bg.sample(bg.BGParams(0.999999, 2, 10, 1))
        assert len(X.zero_set) == 0

    def test_nonzero_fraction(self):
        X = bg.sample(bg.BGParams(0.5, 4, 10000, 3)).X
        assert 0.49 <= np.count_nonzero(X) / X.size <= 0.51

    def test_point_cloud_outliers(self):
        X = bg.sample(bg.BGParams(0.7, 2, 1000, 11)).X
        both = np.mean(np.all(X != 0, axis=0))
        assert abs(both - 0.49) <= 0.05
        # both axes populated
        assert np.any((X[0] != 0) & (X[1] == 0)) and np.any((X[0] == 0) & (X[1] != 0))

    def test_moments(self):
        X = bg.sample(bg.BGParams(0.3, 10, 20000, 5)).X.ravel()
        n = X.size
        m1 = np.abs(X).mean()
        m2 = (X ** 2).mean()
        mu1 = 0.3 * math.sqrt(2 / math.pi)
        sd1 = math.sqrt((0.3 - mu1 ** 2) / n)
        # E x^4 = 3p
        sd2 = math.sqrt((3 * 0.3 - 0.09) / n)
        assert abs(m1 - mu1) < 5 * sd1
        assert abs(m2 - 0.3) < 5 * sd2

    def test_draw_order(self):
        # indicators first, then the u1 block, then the u2 block
        from dictid import rng

        gen = rng.stream(99)
        u = gen.random(3 * 4)
        xi = u[:4] < 0.4
        u1, u2 = 1.0 - u[4:8], u[8:12]
        expect = np.where(xi, np.sqrt(-2 * np.log(u1)) * np.cos(2 * np.pi * u2), 0.0)
        got = bg.draw(rng.stream(99), 4, 0.4)
        np.testing.assert_array_equal(got, expect)


class TestBoundFormulas:
    def test_gamma_vacuous_limit(self):
        assert bg.bound_gamma(0.5, 100, 1e-9)[1] == pytest.approx(2.0)

    def test_gamma_n_scaling(self):
        _, a = bg.bound_gamma(0.4, 500, 0.3)
        _, b = bg.bound_gamma(0.4, 2000, 0.3)
        assert math.log(b / 2) == pytest.approx(4 * math.log(a / 2))

    def test_gamma_union(self):
        thr, prob = bg.bound_gamma(0.4, 500, 0.3)
        thr_u, prob_u = bg.bound_gamma_union(0.4, 6, 500, 0.3)
        assert thr_u == thr
        assert prob_u == pytest.approx(6 * prob)

    def test_eps_domain(self):
        with pytest.raises(PreconditionFailed):
            bg.bound_gamma(0.5, 10, 0.0)
        with pytest.raises(PreconditionFailed):
            bg.bound_support_size(0.5, 10, 1.5)

    def test_support(self):
        assert bg.bound_support_size(0.5, 10, 1e-9) == pytest.approx(2.0)
        a = bg.bound_support_size(0.3, 100, 0.2)
        b = bg.bound_support_size(0.3, 400, 0.2)
        assert math.log(b / 2) == pytest.approx(4 * math.log(a / 2))

    def test_ball(self):
        bb = bg.bound_operator_and_ray(0.3, 4, 100, 1e-9)
        assert bb.op_prob == pytest.approx(2.0)
        probs = [bg.bound_operator_and_ray(0.3, 4, M, 0.2).op_prob for M in (10, 100, 1000)]
        assert probs[0] > probs[1] > probs[2]
        bb = bg.bound_operator_and_ray(0.25, 4, 100, 0.1)
        assert bb.op_threshold == pytest.approx(100 * 1.0 * 1.1)
        assert bb.ray_threshold == pytest.approx(25 * (math.sqrt(2 / math.pi) - 0.1))

    def test_beta(self):
        _, p0 = bg.bound_beta(0.3, 3, 100, 1e-9)
        assert p0 == pytest.approx(2.0)
        bn, prob = bg.bound_beta(0.3, 3, 1000, 0.2)
        assert bn == pytest.approx(bg.BoundInputs(0.3, 3, 1000, 0.2).beta_n)
        assert prob == pytest.approx(2 * math.exp(-300 * 0.04 / (6 * 2 / 1000 + 0.4)))
        # K proportional to N keeps the denominator's first term fixed
        a = bg.bound_beta(0.3, 11, 100, 0.2)[1]
        b = bg.bound_beta(0.3, 41, 400, 0.2)[1]
        assert math.log(b / 2) == pytest.approx(4 * math.log(a / 2))

    @given(st.floats(0.05, 0.95), st.integers(10, 5000), st.floats(0.01, 0.9))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_n(self, p, N, eps):
        assert bg.bound_gamma(p, 2 * N, eps)[1] <= bg.bound_gamma(p, N, eps)[1]
        assert bg.bound_support_size(p, 2 * N, eps) <= bg.bound_support_size(p, N, eps)
        assert bg.bound_bs_norm(p, 3, 2 * N, eps)[0] >= bg.bound_bs_norm(p, 3, N, eps)[0]


class TestChiMoments:
    def test_against_log_gamma(self):
        for L in (1, 4, 9):
            for k in range(1, 6):
                ref = math.exp(k / 2 * math.log(2) + gammaln((k + L) / 2) - gammaln(L / 2))
                assert bg.chi_moment(L, k) == pytest.approx(ref, rel=1e-12)
        assert bg.chi_moment(3, 2) == pytest.approx(3.0)

    def test_claimed_bound_holds_from_second_moment(self):
        for L in range(1, 17):
            for k in range(2, 9):
                assert bg.chi_moment(L, k) <= bg.chi_moment_bound(L, k) * (1 + 1e-12)

    def test_claimed_bound_fails_for_first_moment(self):
        # recorded in the decisions ledger: k = 1 exceeds (L/2)^(1/2)
        assert all(bg.chi_moment(L, 1) > bg.chi_moment_bound(L, 1) for L in range(1, 17))


def theorem4_oracle(p, K, N, mu2):
    f = lambda e: (1 - p) * (1 - 5 * e) - math.sqrt(math.pi / 2 * (K / N + e) * (1 + e / p)) - mu2
    eps = brentq(f, 1e-14, 0.2, xtol=1e-15)
    logb = math.log(4 * K) + K / 2 * math.log(9 * K / (eps ** 2 * p)) - N * p * (1 - p) * eps ** 2 * (1 - 2 * eps) / 2
    return eps, math.exp(min(logb, 0.0))


class TestTheorem4:
    def test_preconditions(self):
        with pytest.raises(PreconditionFailed, match="p >= 4/5"):
            bg.theorem4(0.9, 2, 10_000, 0.1)
        with pytest.raises(PreconditionFailed, match=r"N <= pi K"):
            bg.theorem4(0.3, 2, 5, 0.1)

    def test_asymptotic_gate(self):
        p, K, N = 0.3, 2, 1000
        mu2 = 1 - p - math.sqrt(math.pi * K / (2 * N))
        r = bg.theorem4(p, K, N, mu2)
        assert not r.identifiable_whp
        assert r.reason == "asymptotic-coherence"

    def test_against_root_finder(self):
        for args in ((0.3, 2, 100_000, 0.05), (0.2, 3, 50_000, 0.1), (0.5, 2, 200_000, 0.2)):
            eps, bound = theorem4_oracle(*args)
            r = bg.theorem4(*args)
            assert r.eps_star == pytest.approx(eps, abs=2e-10)
            assert r.eps_star <= eps
            assert r.failure_prob_bound == pytest.approx(bound, rel=1e-6)
            assert r.identifiable_whp == (bound < 1)

    def test_regression_point(self):
        r = bg.theorem4(0.3, 2, 100_000, 0.05)
        assert r.eps_star == pytest.approx(0.0755636547, abs=1e-9)
        assert r.failure_prob_bound == pytest.approx(6.6386618e-18, rel=1e-6)

    def test_small_n_is_vacuous(self):
        r = bg.theorem4(0.3, 2, 100, 0.05)
        assert not r.identifiable_whp
        assert r.failure_prob_bound == 1.0

    def test_smallest_n_regression(self):
        n, r = bg.smallest_n_for(0.3, 2, 0.05, target=0.01)
        assert n == 57344
        assert r.failure_prob_bound <= 0.01
        assert bg.theorem4(0.3, 2, n // 2, 0.05).failure_prob_bound > 0.01

    @given(st.integers(20_000, 10_000_000))
    @settings(max_examples=30, deadline=None)
    def test_nonincreasing_in_n(self, N):
        a = bg.theorem4(0.3, 2, N, 0.05).failure_prob_bound
        b = bg.theorem4(0.3, 2, 2 * N, 0.05).failure_prob_bound
        assert b <= a

    def test_nontrivial_needs_large_sample(self):
        # a bound below 1 requires N p (1-p) eps^2 > K and eps < 1/2
        for N in (2_000, 20_000, 200_000, 2_000_000):
            r = bg.theorem4(0.3, 4, N, 0.05)
            if r.identifiable_whp:
                assert r.eps_star < 0.5
                assert N * 0.3 * 0.7 * r.eps_star ** 2 > 4

    def test_equiangular_basis(self):
        D = bg.equiangular_basis(4, 0.3)
        assert coherence(D, 2) == pytest.approx(0.3, abs=1e-12)
        off = gram_parts(D).M0[~np.eye(4, dtype=bool)]
        np.testing.assert_allclose(off, 0.3 / math.sqrt(3), atol=1e-12)


class TestValidateBound:
    def test_gamma(self):
        v = bg.validate_bound("gamma", {"p": 0.5, "N": 1000, "eps": 0.2}, 2000, seed=1)
        assert v.passed
        assert v.to_json()["pass"] is True

    def test_support(self):
        v = bg.validate_bound("support", {"p": 0.9, "N": 500, "eps": 0.3}, 2000, seed=2)
        assert v.passed

    def test_vacuous_bound_passes(self):
        v = bg.validate_bound("gamma", {"p": 0.5, "N": 10, "eps": 0.01}, 100, seed=3)
        assert v.theoretical_bound >= 1 and v.passed

    def test_errors(self):
        with pytest.raises(UnknownBoundId):
            bg.validate_bound("nope", {}, 100, 0)
        with pytest.raises(PreconditionFailed):
            bg.validate_bound("gamma", {"p": 0.5, "N": 10, "eps": 0.1}, 99, 0)
        with pytest.raises(PreconditionFailed):
            bg.validate_bound("gamma", {"p": 0.5}, 100, 0)

    def test_thread_independent(self):
        par = {"p": 0.3, "L": 3, "n": 50, "eps": 0.3}
        a = bg.validate_bound("beta", par, 500, seed=4, threads=1)
        b = bg.validate_bound("beta", par, 500, seed=4, threads=3)
        assert a == b

    @pytest.mark.slow
    def test_theorem4_event(self):
        v = bg.validate_bound("theorem4", {"p": 0.3, "K": 2, "N": 32768, "mu2": 0.05}, 300, seed=5)
        assert v.theoretical_bound < 0.01
        assert v.passed
