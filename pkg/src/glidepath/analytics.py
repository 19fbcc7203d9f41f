"""Closed-form horizon moments, efficient frontiers, allocation tables.

The horizon mean and variance of the optimal strategy reduce to finite sums
over an index set ``i in {0, 1, 2}`` (the constant part and the two solvent
exponentials), with every time integral collapsing to either a ``Psi``
matrix or an entrywise exponential-integral ``K`` matrix combined through
Hadamard products.  Intermediates are kept complex until the final scalar;
the imaginary residue is asserted small and dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capmkt import MarketState, ModelParams, psi, zero_coupon_rate
from .errors import ConsistencyError
from .solver import OptimalStrategy, allocation_path, solve_optimal

__all__ = [
    "HorizonMoments",
    "FrontierPoint",
    "matrix_psi",
    "kmatrix",
    "closed_form_mean",
    "closed_form_variance",
    "mean_terms",
    "variance_terms",
    "horizon_moments",
    "default_nu_grid",
    "frontier_anchor",
    "efficient_frontier",
    "mean_at_vol",
    "allocation_table",
]

_IMAG_TOL = 1e-10
# K-matrix entries switch to the tau-limit when |d_l + d_m| * tau < this
_K_LIMIT_TOL = 1e-12


@dataclass(frozen=True)
class HorizonMoments:
    """Horizon log-return moments with their annualized forms."""

    mean_log: float
    var_log: float
    ann_mean: float
    ann_vol: float

    @staticmethod
    def from_moments(mean_log: float, var_log: float, horizon: float) -> "HorizonMoments":
        if var_log < 0:
            var_log = 0.0  # negatives beyond tolerance are rejected upstream
        return HorizonMoments(
            mean_log=mean_log,
            var_log=var_log,
            ann_mean=mean_log / horizon,
            ann_vol=float(np.sqrt(var_log / horizon)),
        )


@dataclass(frozen=True)
class FrontierPoint:
    """One efficient-frontier point; ``nu = inf`` marks the zero-vol anchor."""

    nu: float
    ann_vol: float
    ann_mean: float
    mean_log: float = 0.0
    var_log: float = 0.0
    diagnostics: dict = field(default_factory=dict, repr=False)


def matrix_psi(M: np.ndarray, tau: float) -> np.ndarray:
    """``Psi_M(tau) = M^-1 (I - exp(-M tau))``, with ``tau I`` at ``M = 0``."""
    M = np.asarray(M)
    if not np.any(M):
        return tau * np.eye(2)
    from scipy.linalg import expm

    return np.linalg.solve(M, np.eye(2) - expm(-M * tau))


def _kval(c: complex, tau: float) -> complex:
    # (exp(c tau) - 1) / c with an exact tau-limit and a series mid-band to
    # dodge cancellation just above the cutoff
    z = c * tau
    az = abs(z)
    if az < _K_LIMIT_TOL:
        return tau
    if az < 1e-4:
        return tau * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    return (np.exp(z) - 1.0) / c


def kmatrix(Dbar: np.ndarray, Dund: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise exponential integral of two diagonal matrices.

    ``K_lm = (exp((dbar_l + dund_m) tau) - 1) / (dbar_l + dund_m)`` with the
    exact ``tau`` limit when the diagonal sum vanishes.  Satisfies
    ``kmatrix(X, Y, tau) == kmatrix(Y, X, tau).T``.
    """
    db = np.diag(np.asarray(Dbar))
    du = np.diag(np.asarray(Dund))
    out = np.empty((2, 2), dtype=complex)
    for l in range(2):
        for m in range(2):
            out[l, m] = _kval(db[l] + du[m], tau)
    return out


def _spectral_stack(strategy: OptimalStrategy, variance: bool):
    # index-set data per the {0, 1, 2} convention: S0 = 0, Q0 = I, Lambda0 = 0
    sol = strategy.sol
    kappa = strategy.params.kappa
    lam = np.diag(sol.Lambda)
    S = [np.zeros((2, 2)), sol.S1, sol.S2]
    Q = [np.eye(2, dtype=complex), sol.Q1, sol.Q2]
    Lams = [np.zeros(2, dtype=complex), lam, -lam]
    if variance:
        q = [strategy.k1, strategy.q1t, strategy.q2t]
    else:
        q = [strategy.k1 + strategy.k2 / kappa, strategy.q1t, strategy.q2t]
    Qinv = [np.linalg.inv(m) for m in Q]
    return S, Q, Qinv, Lams, q


def _psi_minus_S(strategy: OptimalStrategy, i: int, T: float) -> np.ndarray:
    # Psi_{-S_i}(T) = S_i^-1 (exp(S_i T) - I); T I for the i = 0 block
    if i == 0:
        return T * np.eye(2)
    from .spectral import expm_solvent

    S = strategy.sol.S1 if i == 1 else strategy.sol.S2
    return np.linalg.solve(S, expm_solvent(strategy.sol, i, T) - np.eye(2))


def _drop_imag(value: complex, label: str) -> float:
    if abs(value.imag) > _IMAG_TOL * (1.0 + abs(value.real)):
        raise ConsistencyError(
            f"{label} has imaginary residue {value.imag:.3e}; "
            "spectral bookkeeping is inconsistent"
        )
    return float(value.real)


def mean_terms(strategy: OptimalStrategy) -> dict:
    """Per-term breakdown of the closed-form horizon mean.

    Keys: ``cash`` (the f = 0 mean), ``linear`` (terms linear in the
    integration constants) and ``quadratic`` (the Hadamard block sum).
    Used by the validation report to localize any disagreement with the
    quadrature oracle.
    """
    p, st = strategy.params, strategy.state
    T = st.s - st.t
    frame = strategy.frame
    Gamma = np.asarray(frame.Gamma)
    C = np.asarray(frame.C)
    S, Q, Qinv, Lams, q = _spectral_stack(strategy, variance=False)
    from .spectral import expm_solvent

    cash = p.rbar * T + psi(p.kappa, T) * (st.r_t - p.rbar)
    decay = np.diag(np.exp(-np.diag(Gamma) * T))
    linear = 0.0
    for i in range(3):
        psi_i = _psi_minus_S(strategy, i, T)
        e_si = expm_solvent(strategy.sol, i, T) if i else np.eye(2)
        linear += frame.xibar @ (Gamma + S[i]) @ psi_i @ q[i]
        linear += frame.xi_t @ (e_si - decay) @ q[i]
    quad = 0.0 + 0.0j
    for i in range(3):
        for j in range(3):
            H = Q[i].T @ (Gamma + S[i]).T @ C @ (Gamma + S[j]) @ Q[j]
            K = kmatrix(np.diag(Lams[i]), np.diag(Lams[j]), T)
            quad += q[i] @ Qinv[i].T @ (H * K) @ Qinv[j] @ q[j]
    return {
        "cash": float(cash),
        "linear": float(linear),
        "quadratic": _drop_imag(-0.5 * quad, "horizon-mean quadratic term"),
    }


def closed_form_mean(strategy: OptimalStrategy) -> float:
    """Closed-form E log(V_s/V_t) of the solved strategy."""
    terms = mean_terms(strategy)
    return terms["cash"] + terms["linear"] + terms["quadratic"]


def variance_terms(strategy: OptimalStrategy) -> dict:
    """Per-term breakdown of the closed-form horizon variance.

    Keys: ``constant`` (the k2 drift block), ``linear`` and ``quadratic``.
    """
    st = strategy.state
    T = st.s - st.t
    frame = strategy.frame
    Gamma = np.asarray(frame.Gamma)
    Xi = np.asarray(frame.Xi)
    Gxi = Gamma + Xi
    C = np.asarray(frame.C)
    k2 = strategy.k2
    S, Q, Qinv, Lams, q = _spectral_stack(strategy, variance=True)

    const = float(k2 @ k2 * T)
    psi_G = np.diag([psi(float(g), T) for g in np.diag(Gamma)])
    linear = 0.0
    for i in range(3):
        psi_i = _psi_minus_S(strategy, i, T)
        linear += 2.0 * k2 @ C @ ((Gxi + S[i]) @ psi_i - Xi @ psi_G) @ q[i]
    minus_g = np.diag(-np.diag(Gamma).astype(complex))
    C_xi = Xi @ C @ Xi
    quad = 0.0 + 0.0j
    for i in range(3):
        G_i = Q[i].T @ (Gxi + S[i]).T @ C @ Xi
        for j in range(3):
            G_j = Q[j].T @ (Gxi + S[j]).T @ C @ Xi
            HX = Q[i].T @ (Gxi + S[i]).T @ C @ (Gxi + S[j]) @ Q[j]
            block = Qinv[i].T @ (HX * kmatrix(np.diag(Lams[i]), np.diag(Lams[j]), T)) @ Qinv[j]
            block = block - Qinv[i].T @ (G_i * kmatrix(np.diag(Lams[i]), minus_g, T))
            block = block - (kmatrix(minus_g, np.diag(Lams[j]), T) * G_j.T) @ Qinv[j]
            block = block + C_xi * kmatrix(minus_g, minus_g, T)
            quad += q[i] @ block @ q[j]
    return {
        "constant": const,
        "linear": float(linear),
        "quadratic": _drop_imag(quad, "horizon-variance quadratic term"),
    }


def closed_form_variance(strategy: OptimalStrategy) -> float:
    """Closed-form V log(V_s/V_t); small negatives are clamped to zero.

    A negative value beyond ``1e-10`` of the term scale raises
    ``ConsistencyError`` (it would signal a transcription bug, not noise).
    """
    terms = variance_terms(strategy)
    var = terms["constant"] + terms["linear"] + terms["quadratic"]
    scale = max(abs(terms["constant"]), abs(terms["linear"]), abs(terms["quadratic"]), 1e-16)
    if var < -1e-10 * scale:
        raise ConsistencyError(
            f"closed-form variance {var:.3e} negative beyond tolerance "
            f"(term scale {scale:.3e})"
        )
    return max(var, 0.0)


def horizon_moments(strategy: OptimalStrategy) -> HorizonMoments:
    """Closed-form moments bundled with their annualizations."""
    return HorizonMoments.from_moments(
        closed_form_mean(strategy),
        closed_form_variance(strategy),
        strategy.s - strategy.t,
    )


def default_nu_grid(lo: float = 1e-3, hi: float = 1e3, n: int = 50) -> np.ndarray:
    """Log-spaced risk-aversion grid, descending (high aversion first)."""
    return np.logspace(np.log10(hi), np.log10(lo), n)


def frontier_anchor(p: ModelParams, st: MarketState) -> FrontierPoint:
    """The exact infinite-risk-aversion endpoint: zero vol at the bond yield."""
    T = st.s - st.t
    rate = zero_coupon_rate(p, st.r_t, T)
    return FrontierPoint(
        nu=float("inf"), ann_vol=0.0, ann_mean=rate, mean_log=rate * T, var_log=0.0
    )


def efficient_frontier(
    p: ModelParams, st: MarketState, nu_grid, failures: list | None = None
) -> list:
    """One frontier point per risk aversion; failed solves are skipped.

    Append ``(nu, exception)`` records to ``failures`` when provided so the
    caller can surface skipped points in its report.  ``nu = inf`` entries
    map to the exact anchor.
    """
    points = []
    for nu in np.asarray(nu_grid, dtype=float):
        if np.isinf(nu):
            points.append(frontier_anchor(p, st))
            continue
        try:
            strategy = solve_optimal(p, st, float(nu))
            mom = horizon_moments(strategy)
        except Exception as exc:  # noqa: BLE001 - per-point isolation is the contract
            if failures is None:
                raise
            failures.append((float(nu), exc))
            continue
        points.append(
            FrontierPoint(
                nu=float(nu),
                ann_vol=mom.ann_vol,
                ann_mean=mom.ann_mean,
                mean_log=mom.mean_log,
                var_log=mom.var_log,
                diagnostics={
                    "branch": strategy.sol.branch.value,
                    "boundary_residual": strategy.boundary_residual,
                },
            )
        )
    return points


def mean_at_vol(
    p: ModelParams,
    st: MarketState,
    target_vol: float,
    nu_lo: float = 1e-6,
    nu_hi: float = 1e6,
) -> float:
    """Annualized mean on the frontier at a matched annualized volatility.

    Root-finds the risk aversion whose frontier point has the target vol
    (vol is monotone decreasing in nu on the upper branch).
    """
    from scipy.optimize import brentq

    def vol_gap(log_nu):
        mom = horizon_moments(solve_optimal(p, st, float(np.exp(log_nu))))
        return mom.ann_vol - target_vol

    log_nu = brentq(vol_gap, np.log(nu_lo), np.log(nu_hi), xtol=1e-12)
    return horizon_moments(solve_optimal(p, st, float(np.exp(log_nu)))).ann_mean


def allocation_table(strategy: OptimalStrategy, n_points: int) -> np.ndarray:
    """Uniform sampling of the allocation path, columns ``(u, f_r, f_S)``.

    The rate column is the bond-channel volatility loading and is negative
    when long bonds, matching the bond-volatility sign convention.
    """
    if n_points < 2:
        raise ValueError(f"allocation table needs at least 2 points, got {n_points}")
    us = np.linspace(strategy.t, strategy.s, int(n_points))
    f = allocation_path(strategy, us)
    return np.column_stack([us, f])
