import numpy as np
import pytest

from glidepath.capmkt import MarketState, ModelParams, build_frame, psi, upsilon
from glidepath.errors import ParameterError, SimulationError
from glidepath.mcsim import (
    SimConfig,
    _run_paths,
    discretization_sweep,
    simulate,
    simulate_many,
    terminal_states,
)
from glidepath.solver import solve_optimal, strategy_path
from glidepath.variational import StrategyPath

from conftest import SLOW


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ParameterError):
            SimConfig(1, 0.1, 0).validate(10.0)
        with pytest.raises(ParameterError):
            SimConfig(100, 0.0, 0).validate(10.0)
        with pytest.raises(ParameterError):
            SimConfig(100, 11.0, 0).validate(10.0)
        with pytest.raises(ParameterError):
            SimConfig(101, 0.1, 0, antithetic=True).validate(10.0)

    def test_step_rounding_lands_on_horizon(self):
        cfg = SimConfig(10, 0.3, 0)
        n = cfg.n_steps(10.0)
        assert n == 34  # ceil(10 / 0.3)
        assert n * (10.0 / n) == pytest.approx(10.0, abs=0)


class TestDeterminism:
    def test_bitwise_repeatable(self, slow_params, state10):
        path = StrategyPath.constant(np.array([-0.1, 0.2]), 0.0, 10.0)
        cfg = SimConfig(2000, 0.25, 31337, antithetic=True)
        a = simulate(slow_params, state10, path, cfg)
        b = simulate(slow_params, state10, path, cfg)
        assert a == b  # dataclass equality on floats -> bitwise

    def test_seed_changes_result(self, slow_params, state10):
        path = StrategyPath.constant(np.array([-0.1, 0.2]), 0.0, 10.0)
        a = simulate(slow_params, state10, path, SimConfig(2000, 0.25, 1))
        b = simulate(slow_params, state10, path, SimConfig(2000, 0.25, 2))
        assert a.mean_log != b.mean_log

    def test_shared_state_matches_individual_runs(self, slow_params, state10):
        s1 = StrategyPath.constant(np.array([-0.1, 0.2]), 0.0, 10.0)
        s2 = StrategyPath.zero(0.0, 10.0)
        cfg = SimConfig(1000, 0.5, 99)
        both = simulate_many(slow_params, state10, [s1, s2], cfg)
        assert both[0] == simulate(slow_params, state10, s1, cfg)
        assert both[1] == simulate(slow_params, state10, s2, cfg)

    def test_numpy_fallback_matches_numba(self, slow_params, state10):
        pytest.importorskip("numba")
        us = 0.0 + np.arange(21) * 0.5
        f = StrategyPath.constant(np.array([-0.15, 0.25]), 0.0, 10.0).sample(us)
        cfg = SimConfig(512, 0.5, 2718, antithetic=True)
        fast_path, r1, x1 = _run_paths(slow_params, state10, [f], cfg, use_numba=True)
        slow_path, r2, x2 = _run_paths(slow_params, state10, [f], cfg, use_numba=False)
        np.testing.assert_array_equal(fast_path, slow_path)
        np.testing.assert_array_equal(r1, r2)
        np.testing.assert_array_equal(x1, x2)


class TestExactTransitions:
    def test_single_step_marginals(self, slow_params, state10):
        # dt = horizon in one exact step: moments of r_s and x_s at 3 SE
        p = slow_params
        n = 400_000
        r_s, x_s = terminal_states(p, state10, SimConfig(n, 10.0, 555))
        T = 10.0
        for sample, mean, var in (
            (r_s, p.rbar + np.exp(-p.kappa * T) * (state10.r_t - p.rbar),
             p.sigma_r**2 * psi(2 * p.kappa, T)),
            (x_s, p.xbar + np.exp(-p.alpha * T) * (state10.x_t - p.xbar),
             p.sigma_x**2 * psi(2 * p.alpha, T)),
        ):
            assert abs(sample.mean() - mean) < 3 * np.sqrt(var / n)
            assert abs(sample.var(ddof=1) - var) < 3 * var * np.sqrt(2.0 / n)

    def test_single_step_equals_many_steps_in_distribution(self, slow_params, state10):
        # same moments whether the horizon is walked in 1 or 40 exact steps
        p = slow_params
        n = 200_000
        r1, _ = terminal_states(p, state10, SimConfig(n, 10.0, 77))
        r2, _ = terminal_states(p, state10, SimConfig(n, 0.25, 78))
        se = np.sqrt(r1.var() / n)
        assert abs(r1.mean() - r2.mean()) < 4 * se

    def test_driver_correlation(self, slow_params, state10):
        # cross-correlation of the sampled OU innovations reflects rho
        p = slow_params
        n = 400_000
        T = 10.0
        r_s, x_s = terminal_states(p, state10, SimConfig(n, T, 404))
        expected = (
            -p.rho * p.sigma_r * p.sigma_x * psi(p.kappa + p.alpha, T)
            / np.sqrt(p.sigma_r**2 * psi(2 * p.kappa, T) * p.sigma_x**2 * psi(2 * p.alpha, T))
        )
        got = np.corrcoef(r_s, x_s)[0, 1]
        assert abs(got - expected) < 3.0 / np.sqrt(n)


class TestMoments:
    def test_near_deterministic_cash(self, state10):
        # vanishing volatilities: every path returns rbar * (s - t)
        p = ModelParams(**{**SLOW, "sigma_r": 1e-10, "sigma_x": 1e-10})
        res = simulate(p, state10, StrategyPath.zero(0.0, 10.0), SimConfig(100, 0.5, 3))
        assert res.mean_log == pytest.approx(0.2, abs=1e-8)
        assert res.var_log < 1e-16

    def test_cash_strategy_moments(self, slow_params, state10):
        p = slow_params
        res = simulate(
            p, state10, StrategyPath.zero(0.0, 10.0), SimConfig(50_000, 1 / 252, 1234)
        )
        mean = p.rbar * 10.0
        var = p.sigma_r**2 * upsilon(p.kappa, 10.0)
        assert abs(res.mean_log - mean) < 3 * res.se_mean
        assert abs(res.var_log - var) < 3 * res.se_var

    def test_optimal_strategy_against_closed_forms(self, slow_params, state10):
        from glidepath.analytics import closed_form_mean, closed_form_variance

        strategy = solve_optimal(slow_params, state10, 1.0)
        path = strategy_path(strategy)
        res = simulate(slow_params, state10, path, SimConfig(50_000, 1 / 252, 4321, True))
        assert abs(res.mean_log - closed_form_mean(strategy)) < 3 * res.se_mean
        assert abs(res.var_log - closed_form_variance(strategy)) < 3 * res.se_var

    def test_quadrature_triangle_three_strategies(self, slow_params, state10):
        # zero, constant and optimal strategies against the quadrature
        # moments at 3 SE, on shared state paths
        from glidepath.variational import (
            horizon_mean_quadrature,
            horizon_variance_quadrature,
        )

        p = slow_params
        frame = build_frame(p, state10)
        strategies = [
            StrategyPath.zero(0.0, 10.0),
            StrategyPath.constant(np.array([-0.15, 0.25]), 0.0, 10.0),
            strategy_path(solve_optimal(p, state10, 1.0)),
        ]
        sims = simulate_many(p, state10, strategies, SimConfig(40_000, 1 / 104, 8888, True))
        for path, sim in zip(strategies, sims):
            qm = horizon_mean_quadrature(frame, p, state10, path)
            qv = horizon_variance_quadrature(frame, p, state10, path)
            assert abs(sim.mean_log - qm) < 3 * sim.se_mean
            assert abs(sim.var_log - qv) < 3 * sim.se_var

    def test_antithetic_consistency(self, slow_params, state10):
        path = StrategyPath.constant(np.array([-0.2, 0.3]), 0.0, 10.0)
        on = simulate(slow_params, state10, path, SimConfig(40_000, 1 / 52, 5, True))
        off = simulate(slow_params, state10, path, SimConfig(40_000, 1 / 52, 6, False))
        combined = np.hypot(on.se_mean, off.se_mean)
        assert abs(on.mean_log - off.mean_log) < 3 * combined
        assert on.n_effective == 20_000
        assert off.n_effective == 40_000

    def test_se_invariant(self, slow_params, state10):
        path = StrategyPath.zero(0.0, 10.0)
        res = simulate(slow_params, state10, path, SimConfig(5000, 0.5, 11, True))
        assert res.se_mean == pytest.approx(np.sqrt(res.var_log / res.n_effective), rel=1e-12)
        assert res.var_log >= 0.0

    def test_nonfinite_strategy_rejected(self, slow_params, state10):
        def diverging(u):
            u = np.asarray(u)
            with np.errstate(divide="ignore"):
                fr = np.where(u == 5.0, np.inf, 1.0 / (u - 5.0))
            return np.stack([fr, np.zeros(np.shape(u))], axis=-1)

        bad = StrategyPath(diverging, 0.0, 10.0, vectorized=True)
        with pytest.raises((ParameterError, SimulationError)):
            simulate(slow_params, state10, bad, SimConfig(100, 2.5, 0))


class TestDiscretizationSweep:
    def test_requires_decreasing_dts(self, slow_params, state10):
        path = StrategyPath.zero(0.0, 10.0)
        with pytest.raises(ParameterError):
            discretization_sweep(
                slow_params, state10, path, SimConfig(100, 1.0, 0), [0.1, 0.2]
            )

    def test_constant_strategy_ito_isometry(self, slow_params, state10):
        # left-point variance of the stochastic integral is exact for a
        # constant integrand at every level
        f = np.array([-0.25, 0.35])
        path = StrategyPath.constant(f, 0.0, 10.0)
        cfg = SimConfig(4096, 0.5, 13, antithetic=True)
        rep = discretization_sweep(slow_params, state10, path, cfg, [0.5, 0.25])
        exact = f @ slow_params.correlation() @ f * 10.0
        assert rep.sto_int_exact == pytest.approx(exact, rel=1e-10)
        for level in rep.levels + [rep.anchor]:
            se = level.sto_int_var * np.sqrt(2.0 / cfg.n_paths)
            assert abs(level.sto_int_var - exact) < 4 * se

    def test_variance_bias_first_order(self, slow_params, state10):
        # nested halvings on the optimal strategy: anchor-differenced
        # variance bias halves per level within the [0.3, 0.8] band
        path = strategy_path(solve_optimal(slow_params, state10, 1.0))
        cfg = SimConfig(8192, 1 / 13, 2029, antithetic=True)
        rep = discretization_sweep(
            slow_params, state10, path, cfg, [1 / 13, 1 / 26, 1 / 52]
        )
        for ratio in rep.var_bias_ratios:
            assert 0.3 <= ratio <= 0.8
        # anchor agrees with the quadrature reference statistically
        assert abs(rep.anchor.var_log - rep.ref_var) < 3 * rep.anchor.se_var
        assert abs(rep.anchor.mean_log - rep.ref_mean) < 3 * rep.anchor.se_mean

    def test_mean_estimator_second_order(self, slow_params, state10):
        # trapezoid mean bias shrinks ~4x per halving (reported, not gated)
        path = strategy_path(solve_optimal(slow_params, state10, 1.0))
        cfg = SimConfig(4096, 1 / 13, 515, antithetic=True)
        rep = discretization_sweep(
            slow_params, state10, path, cfg, [1 / 13, 1 / 26, 1 / 52]
        )
        for ratio in rep.mean_bias_ratios:
            assert 0.1 <= ratio <= 0.45
