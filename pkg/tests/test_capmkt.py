import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from glidepath.capmkt import (
    MarketState,
    ModelParams,
    bond_volatility,
    build_frame,
    psi,
    risk_premium_moments,
    upsilon,
    zero_coupon_rate,
)
from glidepath.errors import HorizonError, MaturityError, ParameterError
from glidepath.mcsim import SimConfig, terminal_states

from conftest import SLOW


class TestModelParams:
    def test_table_sets_validate(self, slow_params, fast_params):
        assert slow_params.alpha == 0.01
        assert fast_params.alpha == 0.25

    @pytest.mark.parametrize("field", ["sigma_r", "sigma_x", "sigma_S", "kappa", "alpha", "a"])
    def test_positivity(self, field):
        with pytest.raises(ParameterError):
            ModelParams(**{**SLOW, field: 0.0})

    def test_rho_bounds(self):
        with pytest.raises(ParameterError):
            ModelParams(**{**SLOW, "rho": 1.0})
        with pytest.raises(ParameterError):
            ModelParams(**{**SLOW, "rho": -1.2})

    @pytest.mark.parametrize("field,value", [("a", 0.05), ("alpha", 0.05), ("alpha", 0.04)])
    def test_coincident_speeds_rejected(self, field, value):
        with pytest.raises(ParameterError):
            ModelParams(**{**SLOW, field: value})

    def test_near_coincident_within_tolerance_rejected(self):
        with pytest.raises(ParameterError):
            ModelParams(**{**SLOW, "a": 0.05 * (1 + 1e-13)})

    def test_market_state_ordering(self):
        with pytest.raises(HorizonError):
            MarketState(0.02, 0.04, 5.0, 5.0)


class TestPsi:
    def test_zero_interval(self):
        assert psi(0.05, 0.0) == 0.0

    def test_scalar_value(self):
        # frozen from a 40-digit evaluation of (1 - exp(-0.5)) / 0.05
        assert psi(0.05, 10.0) == pytest.approx(7.8693868057473315, abs=1e-12)

    def test_zero_speed_limit(self):
        assert psi(0.0, 10.0) == 10.0
        # continuity of the limit
        assert psi(1e-12, 10.0) == pytest.approx(10.0, abs=1e-9)

    @given(
        alpha=hst.floats(min_value=1e-3, max_value=2.0),
        tau=hst.floats(min_value=0.0, max_value=100.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_and_bounded(self, alpha, tau):
        val = psi(alpha, tau)
        assert 0.0 <= val <= 1.0 / alpha + 1e-12
        assert psi(alpha, tau + 0.5) >= val  # increasing in tau
        if alpha * tau < 30.0:  # strict until exp(-alpha tau) underflows the ulp
            assert psi(alpha, tau + 0.5) > val

    def test_vectorized(self):
        taus = np.array([0.0, 1.0, 10.0])
        out = psi(0.05, taus)
        assert out.shape == (3,)
        assert out[0] == 0.0


class TestUpsilon:
    def test_zero_interval(self):
        assert upsilon(0.04, 0.0) == 0.0

    def test_scalar_value(self):
        # frozen from a 40-digit evaluation
        assert upsilon(0.04, 10.0) == pytest.approx(249.61890644793447, rel=1e-12)

    def test_invalid_speed(self):
        with pytest.raises(ParameterError):
            upsilon(0.0, 1.0)
        with pytest.raises(ParameterError):
            upsilon(-0.1, 1.0)

    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.25])
    @pytest.mark.parametrize("tau", [1.0, 10.0, 50.0])
    def test_matches_quadrature_of_psi_squared(self, alpha, tau):
        # Gauss-Legendre oracle for the defining integral of psi^2
        x, w = np.polynomial.legendre.leggauss(80)
        u = 0.5 * tau * (x + 1.0)
        integral = 0.5 * tau * float(w @ psi(alpha, u) ** 2)
        assert upsilon(alpha, tau) == pytest.approx(integral, rel=1e-10)

    @given(
        alpha=hst.floats(min_value=1e-3, max_value=1.0),
        tau=hst.floats(min_value=1e-6, max_value=80.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_strictly_positive(self, alpha, tau):
        assert upsilon(alpha, tau) > 0.0


class TestFrame:
    def test_xi_t_vanishes_at_long_run_means(self, slow_params, state10):
        frame = build_frame(slow_params, state10)
        np.testing.assert_allclose(frame.xi_t, [0.0, 0.0], atol=0)

    def test_xibar_direct_substitution(self, slow_params, state10):
        frame = build_frame(slow_params, state10)
        np.testing.assert_allclose(
            frame.xibar, [-0.04, 0.26666666666666667], rtol=1e-14
        )

    def test_eta_r(self, slow_params, state10):
        frame = build_frame(slow_params, state10)
        np.testing.assert_allclose(frame.eta_r, [0.01, 0.0], atol=1e-18)

    def test_structure(self, slow_params, state10):
        p = slow_params
        frame = build_frame(p, state10)
        np.testing.assert_allclose(frame.Gamma, np.diag([p.kappa, p.alpha]))
        np.testing.assert_allclose(frame.Xi, np.diag([p.a - p.kappa, -p.sigma_x / p.sigma_S]))
        assert np.linalg.matrix_rank(frame.Gamma) == 2
        assert np.linalg.matrix_rank(frame.Xi) == 2
        np.testing.assert_allclose(np.diag(frame.C), [1.0, 1.0])
        assert frame.C[0, 1] == p.rho
        assert np.linalg.det(frame.C) == pytest.approx(1 - p.rho**2)
        np.testing.assert_allclose(frame.Gamma_xi, np.diag([p.a, p.alpha_prime]))

    def test_eps_identity(self, slow_params, state10):
        # eps0 + eps1 . xibar recovers the real-world mean rate
        frame = build_frame(slow_params, state10)
        assert frame.eps0 + frame.eps1 @ frame.xibar == pytest.approx(
            slow_params.rbar, abs=1e-12
        )

    def test_frame_arrays_are_readonly(self, slow_params, state10):
        frame = build_frame(slow_params, state10)
        with pytest.raises(ValueError):
            frame.xibar[0] = 1.0


class TestRiskPremiumMoments:
    def test_zero_horizon_cov(self, slow_params, state10):
        frame = build_frame(slow_params, state10)
        _, cov = risk_premium_moments(frame, slow_params, 0.0)
        np.testing.assert_allclose(cov, np.zeros((2, 2)), atol=0)

    def test_asymptotic_variance(self, slow_params, state10):
        p = slow_params
        frame = build_frame(p, state10)
        _, cov = risk_premium_moments(frame, p, 1e6)
        V = np.linalg.solve(frame.Xi, np.linalg.solve(frame.Xi, cov).T).T
        expected = np.array(
            [
                [1 / (2 * p.kappa), p.rho / (p.kappa + p.alpha)],
                [p.rho / (p.kappa + p.alpha), 1 / (2 * p.alpha)],
            ]
        )
        np.testing.assert_allclose(V, expected, atol=1e-8)

    def test_cov_psd_random_params(self):
        rng = np.random.default_rng(7)
        from conftest import random_params

        for _ in range(50):
            p = random_params(rng)
            st = MarketState(0.02, 0.03, 0.0, 10.0)
            frame = build_frame(p, st)
            tau = rng.uniform(0.0, 50.0)
            _, cov = risk_premium_moments(frame, p, tau)
            np.testing.assert_allclose(cov, cov.T, atol=1e-15)
            assert np.linalg.eigvalsh(cov).min() >= -1e-12

    def test_mean_decay(self, slow_params):
        st = MarketState(r_t=0.03, x_t=0.01, t=0.0, s=10.0)
        frame = build_frame(slow_params, st)
        mean, _ = risk_premium_moments(frame, slow_params, 5.0)
        decay = np.exp(-np.array([slow_params.kappa, slow_params.alpha]) * 5.0)
        np.testing.assert_allclose(mean, frame.xibar + decay * frame.xi_t, rtol=1e-14)

    def test_cov_matches_exact_ou_sampling(self, slow_params, state10):
        # Monte Carlo oracle: single exact-transition step to the horizon,
        # a million draws, elementwise 3-standard-error gate
        p = slow_params
        frame = build_frame(p, state10)
        n = 1_000_000
        r_s, x_s = terminal_states(p, state10, SimConfig(n, state10.horizon, 9001))
        xi = np.column_stack(
            [
                ((p.a - p.kappa) * r_s + p.kappa * p.rbar - p.a * p.b) / p.sigma_r,
                x_s / p.sigma_S,
            ]
        )
        sample = np.cov(xi.T)
        _, cov = risk_premium_moments(frame, p, state10.horizon)
        # SE of a covariance entry ~ sqrt((c_ii c_jj + c_ij^2)/n)
        for i in range(2):
            for j in range(2):
                se = np.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / n)
                assert abs(sample[i, j] - cov[i, j]) < 3.0 * se


class TestZeroCouponRate:
    def test_table_value(self, slow_params):
        # frozen from a 40-digit evaluation of the closed form
        assert zero_coupon_rate(slow_params, 0.02, 10.0) == pytest.approx(
            0.02050990661865131, abs=1e-12
        )

    def test_short_rate_limit(self, slow_params):
        assert zero_coupon_rate(slow_params, 0.02, 1e-8) == pytest.approx(0.02, abs=1e-6)

    def test_flat_curve_degenerate(self):
        p = ModelParams(**{**SLOW, "sigma_r": 1e-14, "b": 0.03})
        assert zero_coupon_rate(p, 0.03, 10.0) == pytest.approx(0.03, abs=1e-12)

    def test_bad_horizon(self, slow_params):
        with pytest.raises(HorizonError):
            zero_coupon_rate(slow_params, 0.02, 0.0)


class TestBondVolatility:
    def test_maturing_bond(self, slow_params):
        assert bond_volatility(slow_params, 5.0, 5.0) == 0.0

    def test_thirty_year_value(self, slow_params):
        assert bond_volatility(slow_params, 0.0, 30.0) == pytest.approx(
            -0.17470144702194948, abs=1e-12
        )

    def test_nonpositive_and_monotone(self, slow_params):
        taus = np.linspace(0.0, 50.0, 101)
        vols = np.array([bond_volatility(slow_params, 0.0, m) for m in taus])
        assert (vols <= 0.0).all()
        assert (np.diff(np.abs(vols)) > 0.0).all()

    def test_maturity_in_past(self, slow_params):
        with pytest.raises(MaturityError):
            bond_volatility(slow_params, 2.0, 1.0)


def test_diagonal_exponential_is_elementwise(slow_params, state10):
    frame = build_frame(slow_params, state10)
    tau = 3.7
    direct = np.diag(np.exp(-np.diag(frame.Gamma) * tau))
    from scipy.linalg import expm

    np.testing.assert_array_equal(direct, np.diag(np.diag(expm(-frame.Gamma * tau))))
