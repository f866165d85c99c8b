import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragkin.asympt import lambda_powerlaw, number_asympt
from fragkin.errors import DegenerateDistributionError, DomainError, EmptyPopulationError
from fragkin.grid import DensityState, GammaLike, init_density, make_log_grid, mellin_numeric
from fragkin.kernel import PowerLaw, mellin_p, mu_coeff
from fragkin.limitdist import (
    LimitLaw,
    RescaledDensity,
    alpha_from_variance,
    distance_to_limit,
    fit_alpha,
    limit_cdf,
    limit_density,
    limit_mellin_F,
    log_gamma,
    rescale,
)


def limit_state(alpha, n=512, r_min=1e-3, r_max=10.0, scale=1.0):
    grid = make_log_grid(r_min, r_max, n)
    return DensityState(grid, scale * limit_density(alpha, grid.r), 3.0)


class TestLogGamma:
    def test_examples(self):
        assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
        assert log_gamma(5.0) == pytest.approx(math.log(24.0), abs=1e-13)
        assert log_gamma(0.5) == pytest.approx(0.5723649429247001, abs=1e-13)

    def test_against_mpmath(self):
        xs = np.concatenate((np.linspace(0.1, 50.0, 997), [0.1, 0.4999, 0.5, 0.5001, 1.5, 2.0]))
        ours = log_gamma(xs)
        for x, value in zip(xs, ours):
            assert abs(value - float(mpmath.loggamma(mpmath.mpf(float(x))))) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.1, 50.0))
    def test_recurrence(self, x):
        assert log_gamma(x + 1.0) == pytest.approx(log_gamma(x) + math.log(x), abs=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            log_gamma(x)


class TestLimitDensity:
    def test_examples(self):
        assert limit_density(1e-12, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-9)
        assert limit_density(1.0, 1.0) == pytest.approx(4 * math.exp(-2.0), rel=1e-13)
        assert limit_density(1.0, 0.0) == 0.0

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
    def test_normalised(self, alpha):
        total = mpmath.quad(lambda r: limit_density(alpha, float(r)), [0, 1, 5, mpmath.inf])
        assert float(total) == pytest.approx(1.0, abs=1e-8)

    def test_large_alpha_no_overflow(self):
        value = limit_density(300.0, 1.0)
        assert math.isfinite(value) and value > 0

    @pytest.mark.parametrize("args", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            limit_density(*args)

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
    def test_cdf_against_mpmath(self, alpha):
        xs = np.array([0.0, 0.05, 0.3, 1.0, 2.0, 6.0])
        oracle = [float(mpmath.gammainc(alpha + 1, 0, (alpha + 1) * x, regularized=True)) for x in xs]
        np.testing.assert_allclose(limit_cdf(alpha, xs), oracle, atol=1e-8)


class TestMellinF:
    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5, 7.0])
    def test_normalisation_and_mean(self, alpha):
        assert limit_mellin_F(alpha, 1.0) == pytest.approx(1.0, rel=1e-13)
        assert limit_mellin_F(alpha, 2.0) == pytest.approx(1.0, rel=1e-13)

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
    @pytest.mark.parametrize("s", [1.0, 1.5, 2.0, 3.0, 4.0, 5.0])
    def test_recurrence(self, alpha, s):
        lhs = limit_mellin_F(alpha, s + 1) * (alpha + 1)
        assert lhs == pytest.approx((alpha + s) * limit_mellin_F(alpha, s), rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
    @pytest.mark.parametrize("s", [1.0, 2.0, 3.0, 4.0])
    def test_numeric_mellin(self, alpha, s):
        state = limit_state(alpha, n=4096, r_min=1e-8, r_max=80.0)
        assert mellin_numeric(state, s) == pytest.approx(limit_mellin_F(alpha, s), rel=1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            limit_mellin_F(1.0, 0.4)
        with pytest.raises(DomainError):
            limit_mellin_F(0.0, 2.0)

    def test_law_object(self):
        law = LimitLaw(2.0)
        assert law.variance == pytest.approx(1 / 3)
        assert law.mellin(3.0) == pytest.approx(limit_mellin_F(2.0, 3.0))
        with pytest.raises(DomainError):
            LimitLaw(0.0)

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
    @pytest.mark.parametrize("C", [0.5, 1.0, 4.0])
    def test_stationary_equation_reduces_to_recurrence(self, alpha, C):
        """Plug the late-time laws into the stationary Mellin equation

            0 = -F(s) d/dt ln(N/lambda) + lambda (p(s) - mu) F(s+1) - (lambda'/lambda) s F(s)

        using numerical time derivatives of the asymptotic N and lambda, and
        check that F from the closed form makes the residual vanish."""
        kernel = PowerLaw(alpha, C)
        t, h = 50.0, 1e-3

        def log_ratio(tau):
            return math.log(number_asympt(tau, alpha, C, 1.0) / lambda_powerlaw(tau, alpha, C))

        d_log_ratio = (log_ratio(t + h) - log_ratio(t - h)) / (2 * h)
        lam = lambda_powerlaw(t, alpha, C)
        lam_dot = (lambda_powerlaw(t + h, alpha, C) - lambda_powerlaw(t - h, alpha, C)) / (2 * h)
        assert d_log_ratio * t == pytest.approx(4.0, rel=1e-8)
        assert lam_dot / lam * t == pytest.approx(-1.0, rel=1e-8)
        for s in (1.0, 1.5, 2.0, 3.0, 5.0, 6.5):
            F_s, F_next = limit_mellin_F(alpha, s), limit_mellin_F(alpha, s + 1)
            terms = (
                -F_s * d_log_ratio,
                lam * (mellin_p(kernel, s) - mu_coeff(kernel)) * F_next,
                -lam_dot / lam * s * F_s,
            )
            assert abs(sum(terms)) <= 1e-7 * max(abs(x) for x in terms)


class TestRescale:
    def test_mean_is_one(self):
        for spec in (GammaLike(0.0), GammaLike(2.0)):
            g = rescale(init_density(spec, make_log_grid(1e-3, 10.0, 512), 1.0))
            assert g.mean == pytest.approx(1.0, rel=1e-6)
            assert float(g.weights @ g.g) == pytest.approx(1.0, rel=1e-12)
            assert np.all(g.g >= 0)

    def test_fixed_point(self):
        state = limit_state(1.0)
        g = rescale(state)
        assert g.lam == pytest.approx(1.0, rel=1e-4)
        assert g.t == 3.0
        np.testing.assert_allclose(g.g, limit_density(1.0, g.x), rtol=1e-3, atol=1e-6)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_scale_invariant(self, factor):
        a = rescale(limit_state(1.0, n=128))
        b = rescale(limit_state(1.0, n=128, scale=factor))
        np.testing.assert_allclose(a.g, b.g, rtol=1e-12)
        np.testing.assert_allclose(a.x, b.x, rtol=1e-12)

    def test_empty(self):
        grid = make_log_grid(1e-3, 10.0, 64)
        with pytest.raises(EmptyPopulationError):
            rescale(DensityState(grid, np.zeros(64)))


class TestDistance:
    def test_exact_sample_small_ks(self):
        d = distance_to_limit(rescale(limit_state(1.0)), 1.0)
        assert d["ks"] <= 2e-4
        assert d["l1"] < 1e-3

    def test_mismatch_large_ks(self):
        # sup |CDF_0.5 - CDF_3| between the two gamma laws, from mpmath: 0.17509
        d = distance_to_limit(rescale(limit_state(0.5)), 3.0)
        assert d["ks"] == pytest.approx(0.17509, abs=1e-3)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 6.0), st.floats(0.1, 6.0))
    def test_ks_bounded(self, a, b):
        d = distance_to_limit(rescale(limit_state(a, n=96)), b)
        assert 0.0 <= d["ks"] <= 1.0
        assert d["l1"] >= 0.0


class TestFitAlpha:
    def test_recovers_one(self):
        assert fit_alpha(rescale(limit_state(1.0))) == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("alpha", [0.5, 3.0])
    def test_recovers_others(self, alpha):
        assert fit_alpha(rescale(limit_state(alpha, r_min=1e-5, n=1024))) == pytest.approx(alpha, rel=0.05)

    def test_formula_and_clamp(self):
        assert alpha_from_variance(0.25) == pytest.approx(3.0)
        assert alpha_from_variance(1.0) == 1e-6
        assert alpha_from_variance(4.0) == 1e-6

    def test_degenerate(self):
        with pytest.raises(DegenerateDistributionError):
            alpha_from_variance(0.0)
        # a single-node spike has zero trapezoid variance
        g = RescaledDensity(x=np.array([0.5, 1.0, 1.5]), g=np.array([0.0, 2.0, 0.0]), t=0.0, lam=1.0)
        with pytest.raises(DegenerateDistributionError):
            fit_alpha(g)
