"""Monte Carlo oracle for horizon log-return moments.

Paths use *exact* Ornstein-Uhlenbeck transitions for the short rate and the
surplus return on the time grid; the per-step draws are a four-dimensional
Gaussian (rate increment, surplus increment, and the two Brownian increments
driving the wealth equation) with the exact joint covariance, factored as
projections onto the Brownian increments plus independent residuals.  Time
integrals use the trapezoid rule on grid nodes and the stochastic integral
uses the left-point rule, so estimates carry an O(dt) weak bias which
``discretization_sweep`` measures directly.

Randomness is counter-based (Philox): normals for step-block ``b`` come from
the key ``(seed << 64) | b``, so results are bitwise reproducible for a
given ``(seed, config, params)`` regardless of scheduling.  Antithetic pairs
share a draw with flipped sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from ._quad import gl_nodes
from .capmkt import MarketState, ModelParams, psi
from .errors import ParameterError, SimulationError
from .variational import StrategyPath

try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

__all__ = [
    "SimConfig",
    "SimResult",
    "SweepLevel",
    "ConvergenceReport",
    "simulate",
    "simulate_many",
    "terminal_states",
    "discretization_sweep",
]

_BLOCK = 32  # steps per Philox block; fixed so streams never depend on scheduling
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``dt`` is a target step; the actual step divides the horizon exactly
    (step count rounded up).  With ``antithetic`` the path count must be
    even and standard errors are computed on pair counts, which is
    conservative.
    """

    n_paths: int
    dt: float
    seed: int
    antithetic: bool = False

    def validate(self, horizon: float):
        if self.n_paths < 2:
            raise ParameterError(f"n_paths must be >= 2, got {self.n_paths}")
        if not 0 < self.dt <= horizon:
            raise ParameterError(
                f"dt must be in (0, horizon={horizon}], got {self.dt}"
            )
        if self.antithetic and self.n_paths % 2:
            raise ParameterError("antithetic sampling needs an even n_paths")

    def n_steps(self, horizon: float) -> int:
        return max(1, int(math.ceil(horizon / self.dt - 1e-9)))


@dataclass(frozen=True)
class SimResult:
    """Moment estimates with standard errors.

    ``se_mean = sqrt(var_log / n_effective)``; ``se_var`` uses the central
    fourth moment.  ``n_effective`` counts independent units (pairs under
    antithetic sampling).
    """

    mean_log: float
    var_log: float
    se_mean: float
    se_var: float
    n_effective: int


def _step_transform(p: ModelParams, dt: float):
    """Per-step constants mapping 4 iid normals to the exact joint draw."""
    sdt = math.sqrt(dt)
    psi_k = psi(p.kappa, dt)
    psi_a = psi(p.alpha, dt)
    a_r = p.sigma_r * psi_k / dt
    b_x = -p.sigma_x * psi_a / dt
    v_r = p.sigma_r**2 * (psi(2.0 * p.kappa, dt) - psi_k**2 / dt)
    l11 = math.sqrt(max(v_r, 0.0))
    c_rx = -p.rho * p.sigma_r * p.sigma_x * (psi(p.kappa + p.alpha, dt) - psi_k * psi_a / dt)
    l21 = c_rx / l11 if l11 > 0.0 else 0.0
    v_x = p.sigma_x**2 * (psi(2.0 * p.alpha, dt) - psi_a**2 / dt)
    l22 = math.sqrt(max(v_x - l21**2, 0.0))
    c_orth = math.sqrt(1.0 - p.rho**2) * sdt
    return dict(
        e_r=math.exp(-p.kappa * dt),
        e_x=math.exp(-p.alpha * dt),
        dw_z0=sdt,
        dws_z0=p.rho * sdt,
        dws_z1=c_orth,
        er_z0=a_r * sdt,
        er_z2=l11,
        ex_z0=b_x * p.rho * sdt,
        ex_z1=b_x * c_orth,
        ex_z2=l21,
        ex_z3=l22,
    )


def _philox_normals(seed: int, block: int, shape) -> np.ndarray:
    key = ((seed & _MASK64) << 64) | (block & _MASK64)
    return Generator(Philox(key=key)).standard_normal(shape)


def _strategy_coeffs(p: ModelParams, st: MarketState, f_nodes: np.ndarray, dt: float):
    """Trapezoid/left-point coefficient arrays for one strategy.

    The node-k deterministic integrand is affine in ``(r_k, x_k)``; the
    returned arrays fold the trapezoid weights into those affine
    coefficients so that per-path accumulation is two multiply-adds.
    """
    n = f_nodes.shape[0] - 1
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    fr, fS = f_nodes[:, 0], f_nodes[:, 1]
    cr = w * (1.0 + fr * (p.a - p.kappa) / p.sigma_r)
    cx = w * (fS / p.sigma_S)
    c0 = float(np.sum(w * fr * (p.kappa * p.rbar - p.a * p.b) / p.sigma_r))
    C = p.correlation()
    q_det = float(np.sum(w * np.einsum("ni,ij,nj->n", f_nodes, C, f_nodes)))
    return cr, cx, c0, q_det


if _HAVE_NUMBA:

    @njit(cache=True)
    def _kernel(zh, anti, r, x, accd, accs, e_r, cm_r, e_x, cm_x, er_z0, er_z2,
                ex_z0, ex_z1, ex_z2, ex_z3, dw_z0, dws_z0, dws_z1, cr, cx,
                fr, fS, k0, fail):  # pragma: no cover - compiled
        nb, ndraw, _ = zh.shape
        ns = accd.shape[0]
        for k in range(nb):
            kk = k0 + k
            for i in range(ndraw):
                z0 = zh[k, i, 0]
                z1 = zh[k, i, 1]
                z2 = zh[k, i, 2]
                z3 = zh[k, i, 3]
                dwr = dw_z0 * z0
                dws = dws_z0 * z0 + dws_z1 * z1
                er = er_z0 * z0 + er_z2 * z2
                ex = ex_z0 * z0 + ex_z1 * z1 + ex_z2 * z2 + ex_z3 * z3
                rn = e_r * r[i] + cm_r + er
                xn = e_x * x[i] + cm_x + ex
                if not (np.isfinite(rn) and np.isfinite(xn)):
                    fail[0] = kk
                    fail[1] = i
                    return
                for m in range(ns):
                    accs[m, i] += fr[m, kk] * dwr + fS[m, kk] * dws
                    accd[m, i] += cr[m, kk + 1] * rn + cx[m, kk + 1] * xn
                r[i] = rn
                x[i] = xn
                if anti:
                    j = ndraw + i
                    rn2 = e_r * r[j] + cm_r - er
                    xn2 = e_x * x[j] + cm_x - ex
                    if not (np.isfinite(rn2) and np.isfinite(xn2)):
                        fail[0] = kk
                        fail[1] = j
                        return
                    for m in range(ns):
                        accs[m, j] += -(fr[m, kk] * dwr + fS[m, kk] * dws)
                        accd[m, j] += cr[m, kk + 1] * rn2 + cx[m, kk + 1] * xn2
                    r[j] = rn2
                    x[j] = xn2
        return


def _numpy_block(zh, anti, r, x, accd, accs, tc, cm_r, cm_x, cr, cx, fr, fS, k0):
    # mirrors the numba kernel expression-for-expression so both paths give
    # identical bit patterns
    nb = zh.shape[0]
    ndraw = zh.shape[1]
    for k in range(nb):
        kk = k0 + k
        z0, z1, z2, z3 = zh[k, :, 0], zh[k, :, 1], zh[k, :, 2], zh[k, :, 3]
        dwr = tc["dw_z0"] * z0
        dws = tc["dws_z0"] * z0 + tc["dws_z1"] * z1
        er = tc["er_z0"] * z0 + tc["er_z2"] * z2
        ex = tc["ex_z0"] * z0 + tc["ex_z1"] * z1 + tc["ex_z2"] * z2 + tc["ex_z3"] * z3
        rn = tc["e_r"] * r[:ndraw] + cm_r + er
        xn = tc["e_x"] * x[:ndraw] + cm_x + ex
        if not (np.isfinite(rn).all() and np.isfinite(xn).all()):
            bad = int(np.flatnonzero(~(np.isfinite(rn) & np.isfinite(xn)))[0])
            raise SimulationError(
                f"non-finite state at step {kk}, path {bad}", path_index=bad, step=kk
            )
        for m in range(accd.shape[0]):
            accs[m, :ndraw] += fr[m, kk] * dwr + fS[m, kk] * dws
            accd[m, :ndraw] += cr[m, kk + 1] * rn + cx[m, kk + 1] * xn
        r[:ndraw] = rn
        x[:ndraw] = xn
        if anti:
            rn2 = tc["e_r"] * r[ndraw:] + cm_r - er
            xn2 = tc["e_x"] * x[ndraw:] + cm_x - ex
            if not (np.isfinite(rn2).all() and np.isfinite(xn2).all()):
                bad = ndraw + int(np.flatnonzero(~(np.isfinite(rn2) & np.isfinite(xn2)))[0])
                raise SimulationError(
                    f"non-finite state at step {kk}, path {bad}", path_index=bad, step=kk
                )
            for m in range(accd.shape[0]):
                accs[m, ndraw:] += -(fr[m, kk] * dwr + fS[m, kk] * dws)
                accd[m, ndraw:] += cr[m, kk + 1] * rn2 + cx[m, kk + 1] * xn2
            r[ndraw:] = rn2
            x[ndraw:] = xn2


def _run_paths(p, st, f_stack, cfg, use_numba=True):
    """Evolve all paths; return per-strategy log-return arrays (ns, n_paths)."""
    horizon = st.horizon
    n_steps = cfg.n_steps(horizon)
    dt = horizon / n_steps
    tc = _step_transform(p, dt)
    cm_r = p.rbar * (1.0 - tc["e_r"])
    cm_x = p.xbar * (1.0 - tc["e_x"])
    ns = len(f_stack)
    cr = np.empty((ns, n_steps + 1))
    cx = np.empty((ns, n_steps + 1))
    c0 = np.empty(ns)
    q_det = np.empty(ns)
    fr = np.empty((ns, n_steps + 1))
    fS = np.empty((ns, n_steps + 1))
    for m, f_nodes in enumerate(f_stack):
        fr[m], fS[m] = f_nodes[:, 0], f_nodes[:, 1]
        cr[m], cx[m], c0[m], q_det[m] = _strategy_coeffs(p, st, f_nodes, dt)

    n_paths = cfg.n_paths
    ndraw = n_paths // 2 if cfg.antithetic else n_paths
    r = np.full(n_paths, st.r_t)
    x = np.full(n_paths, st.x_t)
    accd = np.tile((cr[:, :1] * st.r_t + cx[:, :1] * st.x_t), (1, n_paths))
    accs = np.zeros((ns, n_paths))

    fail = np.array([-1, -1], dtype=np.int64)
    numba_path = use_numba and _HAVE_NUMBA
    for b in range(0, n_steps, _BLOCK):
        nb = min(_BLOCK, n_steps - b)
        zh = _philox_normals(cfg.seed, b // _BLOCK, (nb, ndraw, 4))
        if numba_path:
            _kernel(
                zh, cfg.antithetic, r, x, accd, accs,
                tc["e_r"], cm_r, tc["e_x"], cm_x,
                tc["er_z0"], tc["er_z2"], tc["ex_z0"], tc["ex_z1"],
                tc["ex_z2"], tc["ex_z3"], tc["dw_z0"], tc["dws_z0"], tc["dws_z1"],
                cr, cx, fr, fS, b, fail,
            )
            if fail[0] >= 0:
                raise SimulationError(
                    f"non-finite state at step {int(fail[0])}, path {int(fail[1])}",
                    path_index=int(fail[1]),
                    step=int(fail[0]),
                )
        else:
            _numpy_block(zh, cfg.antithetic, r, x, accd, accs, tc, cm_r, cm_x,
                         cr, cx, fr, fS, b)
    logret = accd + accs + (c0 - 0.5 * q_det)[:, None]
    return logret, r, x


def _summarize(logret: np.ndarray, n_effective: int) -> SimResult:
    n = logret.size
    mean = float(np.mean(logret))
    dev = logret - mean
    var = float(dev @ dev) / (n - 1)
    m4 = float(np.mean(dev**4))
    var_of_var = max(m4 - (n - 3) / (n - 1) * var**2, 0.0) / n_effective
    return SimResult(
        mean_log=mean,
        var_log=var,
        se_mean=math.sqrt(var / n_effective),
        se_var=math.sqrt(var_of_var),
        n_effective=n_effective,
    )


def simulate_many(
    p: ModelParams, st: MarketState, strategies, cfg: SimConfig
) -> list:
    """Estimate moments for several strategies on shared state paths.

    The state paths depend only on ``(params, state, cfg)``, so evaluating
    several strategies at once shares the entire random-number and
    state-evolution cost.
    """
    cfg.validate(st.horizon)
    n_steps = cfg.n_steps(st.horizon)
    us = st.t + np.arange(n_steps + 1) * (st.horizon / n_steps)
    us[-1] = st.s
    f_stack = [s.sample(us) for s in strategies]
    for m, f_nodes in enumerate(f_stack):
        if not np.isfinite(f_nodes).all():
            raise ParameterError(f"strategy {m} evaluates non-finite on the grid")
    logret, _, _ = _run_paths(p, st, f_stack, cfg)
    if not np.isfinite(logret).all():
        bad = int(np.flatnonzero(~np.isfinite(logret).all(axis=0))[0])
        raise SimulationError(f"non-finite log return on path {bad}", path_index=bad)
    n_eff = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    return [_summarize(row, n_eff) for row in logret]


def simulate(
    p: ModelParams, st: MarketState, strategy: StrategyPath, cfg: SimConfig
) -> SimResult:
    """Estimate E log(V_s/V_t) and V log(V_s/V_t) for one strategy."""
    return simulate_many(p, st, [strategy], cfg)[0]


def terminal_states(p: ModelParams, st: MarketState, cfg: SimConfig):
    """Sampled ``(r_s, x_s)`` arrays; exact OU marginals for any step count."""
    cfg.validate(st.horizon)
    n_steps = cfg.n_steps(st.horizon)
    f_stack = [np.zeros((n_steps + 1, 2))]
    _, r, x = _run_paths(p, st, f_stack, cfg)
    return r, x


@dataclass(frozen=True)
class SweepLevel:
    """One discretization level of a convergence sweep."""

    dt: float
    n_steps: int
    mean_log: float
    var_log: float
    se_mean: float
    se_var: float
    sto_int_var: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Coupled-grid convergence study of the weak discretization bias.

    All levels are evaluated on the *same* fine-grid paths (levels subsample
    a common refinement), so level differences are nearly noise-free.  The
    ``anchor`` level is the common refinement itself; ``var_bias_ratios``
    are consecutive ratios of ``var_log - anchor.var_log``, the measurable
    first-order bias.  Mean ratios are reported but the mean estimator is
    second-order accurate (trapezoid plus a zero-mean Ito sum), so its bias
    sits below Monte Carlo resolution at sane path counts.
    """

    levels: list
    anchor: SweepLevel
    ref_mean: float
    ref_var: float
    sto_int_exact: float
    var_bias_vs_closed: list
    mean_bias_vs_closed: list
    var_bias_vs_anchor: list
    mean_bias_vs_anchor: list
    var_bias_ratios: list
    mean_bias_ratios: list


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def discretization_sweep(
    p: ModelParams,
    st: MarketState,
    strategy: StrategyPath,
    cfg: SimConfig,
    dts,
) -> ConvergenceReport:
    """Measure the weak bias of the simulation scheme across step sizes.

    ``dts`` must be decreasing.  Every level is computed from one set of
    paths simulated at the least common refinement of all levels, using
    exact transitions; a level's estimator subsamples states and aggregates
    Brownian increments at its own nodes, which reproduces the level's
    discretization scheme exactly while sharing all randomness.
    """
    cfg.validate(st.horizon)
    dts = [float(d) for d in dts]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ParameterError("dts must be strictly decreasing")
    horizon = st.horizon
    counts = [max(1, int(round(horizon / d))) for d in dts]
    n_fine = _lcm(counts)
    # the anchor must sit well below the finest level or the differenced
    # biases at the fine end degenerate
    while n_fine < 4 * max(counts):
        n_fine *= 2
    if n_fine > 1_000_000:
        raise ParameterError(
            f"common refinement of {counts} needs {n_fine} steps; choose nested dts"
        )
    dt_f = horizon / n_fine
    strides = np.array([n_fine // c for c in counts] + [1], dtype=np.int64)
    n_levels = len(strides)

    tc = _step_transform(p, dt_f)
    cm_r = p.rbar * (1.0 - tc["e_r"])
    cm_x = p.xbar * (1.0 - tc["e_x"])

    cr = np.zeros((n_levels, n_fine + 1))
    cx = np.zeros((n_levels, n_fine + 1))
    frL = np.zeros((n_levels, n_fine + 1))
    fSL = np.zeros((n_levels, n_fine + 1))
    c0 = np.empty(n_levels)
    q_det = np.empty(n_levels)
    level_dts = []
    for l, stride in enumerate(strides):
        n_l = n_fine // stride
        dt_l = horizon / n_l
        level_dts.append(dt_l)
        us = st.t + np.arange(n_l + 1) * dt_l
        f_nodes = strategy.sample(us)
        cr_l, cx_l, c0[l], q_det[l] = _strategy_coeffs(p, st, f_nodes, dt_l)
        # scatter level-node coefficients onto the fine grid
        idx = np.arange(n_l + 1) * stride
        cr[l, idx] = cr_l
        cx[l, idx] = cx_l
        frL[l, idx] = f_nodes[:, 0]
        fSL[l, idx] = f_nodes[:, 1]

    n_paths = cfg.n_paths
    ndraw = n_paths // 2 if cfg.antithetic else n_paths
    r = np.full(n_paths, st.r_t)
    x = np.full(n_paths, st.x_t)
    accd = np.tile((cr[:, :1] * st.r_t + cx[:, :1] * st.x_t), (1, n_paths))
    accs = np.zeros((n_levels, n_paths))
    pwr = np.zeros((n_levels, n_paths))
    pws = np.zeros((n_levels, n_paths))
    fail = np.array([-1, -1], dtype=np.int64)

    runner = _sweep_kernel if _HAVE_NUMBA else _sweep_block_numpy
    for b in range(0, n_fine, _BLOCK):
        nb = min(_BLOCK, n_fine - b)
        zh = _philox_normals(cfg.seed, b // _BLOCK, (nb, ndraw, 4))
        runner(
            zh, cfg.antithetic, r, x, accd, accs, pwr, pws, strides,
            tc["e_r"], cm_r, tc["e_x"], cm_x,
            tc["er_z0"], tc["er_z2"], tc["ex_z0"], tc["ex_z1"],
            tc["ex_z2"], tc["ex_z3"], tc["dw_z0"], tc["dws_z0"], tc["dws_z1"],
            cr, cx, frL, fSL, b, fail,
        )
        if fail[0] >= 0:
            raise SimulationError(
                f"non-finite state at fine step {int(fail[0])}, path {int(fail[1])}",
                path_index=int(fail[1]),
                step=int(fail[0]),
            )

    logret = accd + accs + (c0 - 0.5 * q_det)[:, None]
    n_eff = n_paths // 2 if cfg.antithetic else n_paths
    stats = []
    for l in range(n_levels):
        res = _summarize(logret[l], n_eff)
        sto_var = float(np.var(accs[l], ddof=1))
        stats.append(
            SweepLevel(
                dt=level_dts[l],
                n_steps=n_fine // int(strides[l]),
                mean_log=res.mean_log,
                var_log=res.var_log,
                se_mean=res.se_mean,
                se_var=res.se_var,
                sto_int_var=sto_var,
            )
        )
    anchor = stats[-1]
    levels = stats[:-1]

    from .capmkt import build_frame
    from .variational import horizon_mean_quadrature, horizon_variance_quadrature

    frame = build_frame(p, st)
    ref_mean = horizon_mean_quadrature(frame, p, st, strategy)
    ref_var = horizon_variance_quadrature(frame, p, st, strategy)
    us, ws = gl_nodes(st.t, st.s, 64)
    f = strategy.sample(us)
    sto_exact = float(ws @ np.einsum("ni,ij,nj->n", f, p.correlation(), f))

    var_anchor = [lv.var_log - anchor.var_log for lv in levels]
    mean_anchor = [lv.mean_log - anchor.mean_log for lv in levels]

    def ratios(biases):
        out = []
        for a, b_ in zip(biases, biases[1:]):
            out.append(b_ / a if a != 0.0 else float("nan"))
        return out

    return ConvergenceReport(
        levels=levels,
        anchor=anchor,
        ref_mean=ref_mean,
        ref_var=ref_var,
        sto_int_exact=sto_exact,
        var_bias_vs_closed=[lv.var_log - ref_var for lv in levels],
        mean_bias_vs_closed=[lv.mean_log - ref_mean for lv in levels],
        var_bias_vs_anchor=var_anchor,
        mean_bias_vs_anchor=mean_anchor,
        var_bias_ratios=ratios(var_anchor),
        mean_bias_ratios=ratios(mean_anchor),
    )


if _HAVE_NUMBA:

    @njit(cache=True)
    def _sweep_kernel(zh, anti, r, x, accd, accs, pwr, pws, strides,
                      e_r, cm_r, e_x, cm_x, er_z0, er_z2, ex_z0, ex_z1,
                      ex_z2, ex_z3, dw_z0, dws_z0, dws_z1, cr, cx, fr, fS,
                      k0, fail):  # pragma: no cover - compiled
        nb, ndraw, _ = zh.shape
        L = strides.shape[0]
        n_paths = r.shape[0]
        for k in range(nb):
            kk = k0 + k
            for i in range(ndraw):
                z0 = zh[k, i, 0]
                z1 = zh[k, i, 1]
                z2 = zh[k, i, 2]
                z3 = zh[k, i, 3]
                dwr = dw_z0 * z0
                dws = dws_z0 * z0 + dws_z1 * z1
                er = er_z0 * z0 + er_z2 * z2
                ex = ex_z0 * z0 + ex_z1 * z1 + ex_z2 * z2 + ex_z3 * z3
                rn = e_r * r[i] + cm_r + er
                xn = e_x * x[i] + cm_x + ex
                if not (np.isfinite(rn) and np.isfinite(xn)):
                    fail[0] = kk
                    fail[1] = i
                    return
                r[i] = rn
                x[i] = xn
                for l in range(L):
                    pwr[l, i] += dwr
                    pws[l, i] += dws
                if anti:
                    j = ndraw + i
                    rn2 = e_r * r[j] + cm_r - er
                    xn2 = e_x * x[j] + cm_x - ex
                    if not (np.isfinite(rn2) and np.isfinite(xn2)):
                        fail[0] = kk
                        fail[1] = j
                        return
                    r[j] = rn2
                    x[j] = xn2
                    for l in range(L):
                        pwr[l, j] -= dwr
                        pws[l, j] -= dws
            for l in range(L):
                if (kk + 1) % strides[l] == 0:
                    node = kk + 1
                    prev = node - strides[l]
                    for i in range(n_paths):
                        accs[l, i] += fr[l, prev] * pwr[l, i] + fS[l, prev] * pws[l, i]
                        pwr[l, i] = 0.0
                        pws[l, i] = 0.0
                        accd[l, i] += cr[l, node] * r[i] + cx[l, node] * x[i]
        return


def _sweep_block_numpy(zh, anti, r, x, accd, accs, pwr, pws, strides,
                       e_r, cm_r, e_x, cm_x, er_z0, er_z2, ex_z0, ex_z1,
                       ex_z2, ex_z3, dw_z0, dws_z0, dws_z1, cr, cx, fr, fS,
                       k0, fail):
    nb, ndraw, _ = zh.shape
    L = strides.shape[0]
    for k in range(nb):
        kk = k0 + k
        z0, z1, z2, z3 = zh[k, :, 0], zh[k, :, 1], zh[k, :, 2], zh[k, :, 3]
        dwr = dw_z0 * z0
        dws = dws_z0 * z0 + dws_z1 * z1
        er = er_z0 * z0 + er_z2 * z2
        ex = ex_z0 * z0 + ex_z1 * z1 + ex_z2 * z2 + ex_z3 * z3
        rn = e_r * r[:ndraw] + cm_r + er
        xn = e_x * x[:ndraw] + cm_x + ex
        if not (np.isfinite(rn).all() and np.isfinite(xn).all()):
            fail[0] = kk
            fail[1] = int(np.flatnonzero(~(np.isfinite(rn) & np.isfinite(xn)))[0])
            return
        r[:ndraw] = rn
        x[:ndraw] = xn
        pwr[:, :ndraw] += dwr
        pws[:, :ndraw] += dws
        if anti:
            rn2 = e_r * r[ndraw:] + cm_r - er
            xn2 = e_x * x[ndraw:] + cm_x - ex
            if not (np.isfinite(rn2).all() and np.isfinite(xn2).all()):
                fail[0] = kk
                fail[1] = ndraw + int(
                    np.flatnonzero(~(np.isfinite(rn2) & np.isfinite(xn2)))[0]
                )
                return
            r[ndraw:] = rn2
            x[ndraw:] = xn2
            pwr[:, ndraw:] -= dwr
            pws[:, ndraw:] -= dws
        for l in range(L):
            if (kk + 1) % strides[l] == 0:
                node = kk + 1
                prev = node - strides[l]
                accs[l] += fr[l, prev] * pwr[l] + fS[l, prev] * pws[l]
                pwr[l] = 0.0
                pws[l] = 0.0
                accd[l] += cr[l, node] * r + cx[l, node] * x
