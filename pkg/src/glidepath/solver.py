"""Optimal deterministic factor allocation: particular part, boundary solve.

The transformed optimal exposure is
``y(u) = k1 + psi_kappa(s-u) k2 + exp(S1 (s-u)) q1t + exp(S2 (s-u)) q2t``
and the allocation itself is
``f(u) = (Gamma k1 + k2) + (Gamma + S1) exp(S1 (s-u)) q1t
        + (Gamma + S2) exp(S2 (s-u)) q2t``.

``(k1, k2)`` come from matching the forcing term; ``(q1t, q2t)`` solve a
4x4 real block system encoding ``y(s) = 0`` and the natural boundary
condition at ``t``.  The integration constants depend on the start date and
market state, so they are recomputed per solve and never cached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capmkt import MarketState, ModelParams, RiskPremiumFrame, build_frame, psi
from .errors import (
    IllConditionedBoundaryError,
    NumericError,
    ParameterError,
    SingularSystemError,
)
from .spectral import (
    LambdaMatrixCoeffs,
    SpectralSolution,
    expm_solvent,
    expm_solvent_path,
    solvents,
)
from .variational import ElCoefficients, StrategyPath, el_coefficients

__all__ = [
    "OptimalStrategy",
    "particular_constants",
    "boundary_solve",
    "solve_optimal",
    "optimal_allocation",
    "allocation_path",
    "infinite_nu_allocation",
    "strategy_path",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class OptimalStrategy:
    """A solved optimal allocation, evaluable on ``[t, s]``.

    ``q1t + q2t + k1 = 0`` (the upper boundary) and the 4x4 boundary
    residual are guaranteed at solve time; ``k2`` has an exactly zero
    equity component.
    """

    k1: np.ndarray
    k2: np.ndarray
    q1t: np.ndarray
    q2t: np.ndarray
    sol: SpectralSolution
    coeffs: ElCoefficients
    frame: RiskPremiumFrame
    params: ModelParams
    state: MarketState
    t: float
    s: float
    D1: np.ndarray
    D2: np.ndarray
    boundary_residual: float

    def allocation(self, u):
        return optimal_allocation(self, u)

    def y(self, u: float) -> np.ndarray:
        """Closed-form transformed exposure at ``u``."""
        tau = self.s - u
        return (
            self.k1
            + psi(self.params.kappa, tau) * self.k2
            + expm_solvent(self.sol, 1, tau) @ self.q1t
            + expm_solvent(self.sol, 2, tau) @ self.q2t
        )

    def y_dot(self, u: float) -> np.ndarray:
        """Analytic first derivative of ``y`` (chain rule in ``s - u``)."""
        tau = self.s - u
        kappa = self.params.kappa
        return (
            (kappa * psi(kappa, tau) - 1.0) * self.k2
            - self.sol.S1 @ expm_solvent(self.sol, 1, tau) @ self.q1t
            - self.sol.S2 @ expm_solvent(self.sol, 2, tau) @ self.q2t
        )

    def y_ddot(self, u: float) -> np.ndarray:
        """Analytic second derivative of ``y``."""
        tau = self.s - u
        kappa = self.params.kappa
        return (
            (kappa**2 * psi(kappa, tau) - kappa) * self.k2
            + self.sol.S1 @ self.sol.S1 @ expm_solvent(self.sol, 1, tau) @ self.q1t
            + self.sol.S2 @ self.sol.S2 @ expm_solvent(self.sol, 2, tau) @ self.q2t
        )


def particular_constants(
    coeffs: ElCoefficients, frame: RiskPremiumFrame, p: ModelParams
):
    """Constants ``(k1, k2)`` of the particular solution.

    ``k2 = (sigma_r / (kappa - a), 0)`` matches the psi-dependent part of
    the forcing term; ``k1`` solves ``(1+nu) A k1 = rhs`` through the
    explicit 2x2 inverse of ``A``.
    """
    nu = coeffs.nu
    k2 = np.array([p.sigma_r / (p.kappa - p.a), 0.0])
    rhs = np.array(
        [p.kappa * frame.xibar[0], p.alpha * frame.xibar[1]]
    ) + p.sigma_r / (p.a - p.kappa) * np.array(
        [p.kappa + nu * p.a, p.rho * (p.alpha + nu * coeffs.alpha_prime)]
    )
    det = coeffs.gamma_r2 * coeffs.gamma_S2 - (coeffs.rho * coeffs.a_nu) ** 2
    scale = max(coeffs.gamma_r2 * coeffs.gamma_S2, (coeffs.rho * coeffs.a_nu) ** 2)
    if abs(det) <= 1e-14 * scale:
        raise SingularSystemError(
            f"A-matrix is numerically singular (det {det:.3e}); cannot form k1"
        )
    inv = np.array(
        [
            [coeffs.gamma_S2, -coeffs.rho * coeffs.a_nu],
            [-coeffs.rho * coeffs.a_nu, coeffs.gamma_r2],
        ]
    ) / det
    k1 = inv @ rhs / (1.0 + nu)
    return k1, k2


def boundary_solve(
    coeffs: ElCoefficients,
    sol: SpectralSolution,
    frame: RiskPremiumFrame,
    k1: np.ndarray,
    k2: np.ndarray,
    t: float,
    s: float,
):
    """Solve the 4x4 block system for the integration constants.

    Block form ``[[I, I], [D1 E1, D2 E2]] (q1t; q2t) = (-k1; rhs)`` with
    ``D_i = Gamma + nu Gamma_xi + (1+nu) S_i`` and ``E_i = exp(S_i (s-t))``.
    Rows are equilibrated to unit max-norm before the condition estimate and
    the solve (the bottom block scales with nu); the returned residual is
    measured in the original, unscaled system.
    """
    nu = coeffs.nu
    Gamma, Gamma_xi, C = coeffs.Gamma, coeffs.Gamma_xi, coeffs.C
    D1 = Gamma + nu * Gamma_xi + (1.0 + nu) * sol.S1
    D2 = Gamma + nu * Gamma_xi + (1.0 + nu) * sol.S2
    E1 = expm_solvent(sol, 1, s - t)
    E2 = expm_solvent(sol, 2, s - t)
    M = np.block([[np.eye(2), np.eye(2)], [D1 @ E1, D2 @ E2]])
    rhs = np.concatenate(
        [
            -k1,
            np.linalg.solve(C, frame.xibar + frame.xi_t)
            - (Gamma @ k1 + k2)
            - nu * (Gamma_xi @ k1 + k2),
        ]
    )
    row_scale = np.abs(M).max(axis=1)
    row_scale[row_scale == 0.0] = 1.0
    M_eq = M / row_scale[:, None]
    cond = np.linalg.cond(M_eq, 1)
    if not cond < _COND_LIMIT:
        raise IllConditionedBoundaryError(
            f"boundary block system condition {cond:.3e} exceeds {_COND_LIMIT:.0e}",
            condition=cond,
        )
    q = np.linalg.solve(M_eq, rhs / row_scale)
    residual = float(np.linalg.norm(M @ q - rhs))
    return q[:2], q[2:], D1, D2, residual


def solve_optimal(p: ModelParams, st: MarketState, nu: float) -> OptimalStrategy:
    """Full pipeline: frame -> ODE coefficients -> solvents -> boundary solve."""
    frame = build_frame(p, st)
    coeffs = el_coefficients(frame, p, st, nu)
    sol = solvents(LambdaMatrixCoeffs.from_el_coefficients(coeffs))
    k1, k2 = particular_constants(coeffs, frame, p)
    q1t, q2t, D1, D2, residual = boundary_solve(coeffs, sol, frame, k1, k2, st.t, st.s)
    return OptimalStrategy(
        k1=k1,
        k2=k2,
        q1t=q1t,
        q2t=q2t,
        sol=sol,
        coeffs=coeffs,
        frame=frame,
        params=p,
        state=st,
        t=st.t,
        s=st.s,
        D1=D1,
        D2=D2,
        boundary_residual=residual,
    )


def optimal_allocation(strategy: OptimalStrategy, u: float) -> np.ndarray:
    """Optimal factor exposure ``f(u)`` for ``t <= u <= s``."""
    if u < strategy.t - 1e-12 or u > strategy.s + 1e-12:
        raise ParameterError(
            f"u={u} outside the strategy window [{strategy.t}, {strategy.s}]"
        )
    return allocation_path(strategy, np.array([u]))[0]


def allocation_path(strategy: OptimalStrategy, us: np.ndarray) -> np.ndarray:
    """Vectorized ``f(u)`` on an array of times, shape (n, 2).

    The path is a constant plus four scalar exponentials in ``s - u`` times
    fixed 2-vectors, which is how it is evaluated (no per-point matrix
    algebra).
    """
    us = np.asarray(us, dtype=float)
    taus = strategy.s - us
    Gamma = strategy.coeffs.Gamma
    sol = strategy.sol
    const = Gamma @ strategy.k1 + strategy.k2
    lam = sol.lambdas
    out = np.zeros(taus.shape + (2,), dtype=complex)
    for Q, lamv, q, S in (
        (sol.Q1, lam, strategy.q1t, sol.S1),
        (sol.Q2, -lam, strategy.q2t, sol.S2),
    ):
        weights = np.linalg.solve(Q, q.astype(complex))
        for k in range(2):
            vec = ((Gamma + S) @ Q[:, k]) * weights[k]
            growth = np.exp(lamv[k].real * taus)
            if lamv[k].imag:
                growth = growth * np.exp(1j * lamv[k].imag * taus)
            out += growth[..., None] * vec
    resid = np.abs(out.imag).max() if out.size else 0.0
    if resid > 1e-10 * max(1.0, np.abs(out.real).max()):
        raise NumericError(f"allocation path imaginary residue {resid:.3e}")
    return const[None, :] + out.real


def y_path(strategy: OptimalStrategy, us: np.ndarray, order: int = 0) -> np.ndarray:
    """Closed-form ``y`` (order 0), ``y'`` (1) or ``y''`` (2) on a time grid.

    Derivatives are analytic: powers of the solvents hit the exponential
    terms and the psi part differentiates in closed form, so no finite
    differences are involved.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    us = np.asarray(us, dtype=float)
    taus = strategy.s - us
    kappa = strategy.params.kappa
    pk = psi(kappa, taus)
    # d/du flips the sign of each d/dtau: exp terms pick up (-lam)^order and
    # the psi factor walks through psi -> kappa psi - 1 -> kappa^2 psi - kappa
    k2_coef = {0: pk, 1: kappa * pk - 1.0, 2: kappa**2 * pk - kappa}[order]
    out = np.zeros(taus.shape + (2,), dtype=complex)
    lam = strategy.sol.lambdas
    for Q, lamv, q in (
        (strategy.sol.Q1, lam, strategy.q1t),
        (strategy.sol.Q2, -lam, strategy.q2t),
    ):
        weights = np.linalg.solve(Q, q.astype(complex))
        for k in range(2):
            vec = Q[:, k] * weights[k] * (-lamv[k]) ** order
            out += np.exp(lamv[k] * taus)[..., None] * vec
    resid = np.abs(out.imag).max() if out.size else 0.0
    if resid > 1e-10 * max(1.0, np.abs(out.real).max()):
        raise NumericError(f"y path imaginary residue {resid:.3e}")
    base = out.real + np.multiply.outer(k2_coef, strategy.k2)
    if order == 0:
        base = base + strategy.k1[None, :]
    return base


def infinite_nu_allocation(p: ModelParams, u, s: float):
    """Zero-variance limit: hold the bond maturing at the horizon.

    ``f(u) = (-psi_a(s-u) sigma_r, 0)``; the first slot equals the bond
    volatility of the horizon-matched zero coupon.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u > s):
        raise ParameterError("u must not exceed the horizon s")
    fr = np.asarray(-psi(p.a, s - u) * p.sigma_r)
    return np.stack([fr, np.zeros_like(fr)], axis=-1)


def strategy_path(strategy: OptimalStrategy) -> StrategyPath:
    """Wrap a solved strategy as a vectorized ``StrategyPath``."""
    return StrategyPath(
        lambda u: allocation_path(strategy, np.atleast_1d(u)).reshape(np.shape(u) + (2,)),
        strategy.t,
        strategy.s,
        vectorized=True,
    )
