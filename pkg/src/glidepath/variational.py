"""Horizon moments of deterministic strategies and the Euler-Lagrange data.

A strategy is a factor-exposure path ``f(u) = (f_r, f_S)`` on ``[t, s]``.
This module evaluates its horizon log-return mean and variance by composite
Gauss-Legendre quadrature (the oracle route; closed forms live in
``analytics``), provides the integral transformation ``y`` of the exposure,
and assembles the coefficients, forcing term and boundary data of the
second-order matrix ODE that the optimal transformed exposure satisfies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._quad import gl_nodes, integrate_refined
from .capmkt import MarketState, ModelParams, RiskPremiumFrame, psi
from .errors import GridError, NumericError, RiskAversionError

__all__ = [
    "StrategyPath",
    "ElCoefficients",
    "horizon_mean_quadrature",
    "horizon_variance_quadrature",
    "transform_y",
    "el_coefficients",
    "el_residual",
]


@dataclass(frozen=True)
class StrategyPath:
    """A deterministic factor-exposure path on ``[t, s]``.

    ``evaluator`` maps a time ``u`` to the 2-vector ``(f_r, f_S)``.  Set
    ``vectorized=True`` when the evaluator accepts a 1-d array of times and
    returns an ``(n, 2)`` array; quadrature is much faster that way.
    """

    evaluator: Callable
    t: float
    s: float
    vectorized: bool = False

    @staticmethod
    def zero(t: float, s: float) -> "StrategyPath":
        return StrategyPath(lambda u: np.zeros(np.shape(u) + (2,)), t, s, vectorized=True)

    @staticmethod
    def constant(f: np.ndarray, t: float, s: float) -> "StrategyPath":
        f = np.asarray(f, dtype=float)
        return StrategyPath(
            lambda u: np.broadcast_to(f, np.shape(u) + (2,)).copy(), t, s, vectorized=True
        )

    def sample(self, us: np.ndarray) -> np.ndarray:
        """Evaluate the path at an array of times, shape (n, 2)."""
        us = np.asarray(us, dtype=float)
        if self.vectorized:
            out = np.asarray(self.evaluator(us), dtype=float)
            if out.shape != us.shape + (2,):
                raise NumericError(
                    f"vectorized evaluator returned shape {out.shape}, "
                    f"expected {us.shape + (2,)}"
                )
            return out
        return np.array([self.evaluator(float(u)) for u in us], dtype=float)


def _xi_mean(frame: RiskPremiumFrame, t: float, us: np.ndarray) -> np.ndarray:
    # conditional mean of the risk premium at each node, shape (n, 2)
    decay = np.exp(-np.outer(us - t, np.diag(frame.Gamma)))
    return frame.xibar[None, :] + decay * frame.xi_t[None, :]


def horizon_mean_quadrature(
    frame: RiskPremiumFrame,
    p: ModelParams,
    st: MarketState,
    strategy: StrategyPath,
    per_cell: int = 64,
    rtol: float = 1e-9,
) -> float:
    """E log(V_s/V_t) for an arbitrary deterministic strategy, by quadrature.

    For ``f == 0`` this reduces to the cash mean
    ``rbar (s-t) + psi_kappa(s-t) (r_t - rbar)``.
    """

    def integrand(us):
        f = strategy.sample(us)
        xi = _xi_mean(frame, st.t, us)
        ef = frame.eps1[None, :] + f
        out = frame.eps0 + np.einsum("ni,ni->n", ef, xi)
        return out - 0.5 * np.einsum("ni,ij,nj->n", f, frame.C, f)

    return integrate_refined(integrand, st.t, st.s, per_cell, rtol)


def _h_on_nodes(frame, st, strategy, per_cell):
    # h(u) = f(u) + Xi * integral_u^s exp(-Gamma (v-u)) (eps1 + f(v)) dv,
    # inner integral re-quadratured at every outer node (O(n^2), desk scale);
    # all inner nodes are sampled in one batched evaluator call
    us, ws = gl_nodes(st.t, st.s, per_cell)
    f = strategy.sample(us)
    gdiag = np.diag(frame.Gamma)
    xidiag = np.diag(frame.Xi)
    grids = [gl_nodes(u, st.s, per_cell) for u in us]
    counts = np.array([g[0].size for g in grids])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    all_vs = np.concatenate([g[0] for g in grids])
    all_wv = np.concatenate([g[1] for g in grids])
    fv_all = strategy.sample(all_vs) + frame.eps1[None, :]
    delta = all_vs - np.repeat(us, counts)
    contrib = (all_wv[:, None] * np.exp(-delta[:, None] * gdiag[None, :])) * fv_all
    inner = np.add.reduceat(contrib, offsets[:-1], axis=0)
    return us, ws, f + xidiag[None, :] * inner


def horizon_variance_quadrature(
    frame: RiskPremiumFrame,
    p: ModelParams,
    st: MarketState,
    strategy: StrategyPath,
    per_cell: int = 64,
    rtol: float = 1e-9,
) -> float:
    """V log(V_s/V_t) by tensor quadrature of the h-kernel; always >= 0."""

    def value(pc):
        us, ws, h = _h_on_nodes(frame, st, strategy, pc)
        return float(ws @ np.einsum("ni,ij,nj->n", h, frame.C, h))

    coarse = value(per_cell)
    fine = value(2 * per_cell)
    err = abs(fine - coarse)
    if err > rtol * max(1.0, abs(fine)):
        raise NumericError(
            f"horizon-variance quadrature error {err:.3e} above tolerance",
            achieved_error=err,
        )
    return fine


def transform_y(strategy: StrategyPath, Gamma: np.ndarray) -> Callable:
    """Integral transformation ``y(u) = integral_u^s exp(-Gamma (v-u)) f(v) dv``.

    Returns a function of ``u``; ``y(s) = 0`` exactly and
    ``dy/du = -f(u) + Gamma y(u)``.
    """
    gdiag = np.diag(Gamma)
    s = strategy.s

    def y(u: float) -> np.ndarray:
        vs, wv = gl_nodes(u, s, 64)
        if not vs.size:
            return np.zeros(2)
        fv = strategy.sample(vs)
        kern = np.exp(-np.outer(vs - u, gdiag))
        return (wv[:, None] * kern * fv).sum(axis=0)

    return y


@dataclass(frozen=True)
class ElCoefficients:
    """Coefficients, forcing term and boundary data of the optimality ODE.

    The transformed optimal exposure solves
    ``(1+nu) [C y'' + B y' - A y] = g(u)`` with ``y(s) = 0`` and the natural
    (transversality) condition at ``t``.  ``A`` is symmetric with diagonal
    ``(gamma_r2, gamma_S2)`` and off-diagonal ``rho * a_nu``; ``B`` is
    antisymmetric with ``|B_12| = rho * b_nu``.
    """

    gamma_r2: float
    gamma_S2: float
    a_nu: float
    b_nu: float
    alpha_prime: float
    nu: float
    rho: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    Gamma_xi: np.ndarray
    g: Callable = field(repr=False)
    b0: np.ndarray = field(repr=False)
    b_fn: Callable = field(repr=False)
    t: float = 0.0
    s: float = 0.0


def el_coefficients(
    frame: RiskPremiumFrame, p: ModelParams, st: MarketState, nu: float
) -> ElCoefficients:
    """Assemble the optimality-ODE data for risk aversion ``nu > 0``.

    The scalar coefficients are the nu-weighted blends of the real-world and
    pricing-measure reversion speeds:

    ``gamma_r2 = (kappa^2 + nu a^2) / (1+nu)``
    ``gamma_S2 = (alpha^2 + nu alpha'^2) / (1+nu)``
    ``a_nu = (alpha kappa + nu a alpha') / (1+nu)``
    ``b_nu = ((kappa-alpha) + nu (a-alpha')) / (1+nu)``
    """
    if not (np.isfinite(nu) and nu > 0):
        raise RiskAversionError(f"risk aversion must be finite and > 0, got {nu}")
    ap = p.alpha_prime
    one = 1.0 + nu
    gamma_r2 = (p.kappa**2 + nu * p.a**2) / one
    gamma_S2 = (p.alpha**2 + nu * ap**2) / one
    a_nu = (p.alpha * p.kappa + nu * p.a * ap) / one
    b_nu = ((p.kappa - p.alpha) + nu * (p.a - ap)) / one
    A = np.array([[gamma_r2, p.rho * a_nu], [p.rho * a_nu, gamma_S2]])
    B = p.rho * b_nu * np.array([[0.0, 1.0], [-1.0, 0.0]])
    C = frame.C
    kappa, alpha, a, rho, sigma_r = p.kappa, p.alpha, p.a, p.rho, p.sigma_r
    xibar = frame.xibar
    xi_t = frame.xi_t
    gdiag = np.diag(frame.Gamma)
    s = st.s
    t = st.t

    def g(u):
        pk = psi(kappa, s - u)
        return -(
            np.array([kappa * xibar[0], alpha * xibar[1]])
            + nu
            * sigma_r
            * np.array([1.0 - (kappa + a) * pk, rho * (1.0 - (kappa + ap) * pk)])
        )

    b0 = np.linalg.solve(C, xibar)

    def b_fn(u):
        rhs = np.exp(-gdiag * (u - t)) * xi_t - nu * sigma_r * psi(kappa, s - u) * np.array(
            [1.0, rho]
        )
        return np.linalg.solve(C, rhs)

    return ElCoefficients(
        gamma_r2=gamma_r2,
        gamma_S2=gamma_S2,
        a_nu=a_nu,
        b_nu=b_nu,
        alpha_prime=ap,
        nu=nu,
        rho=rho,
        A=A,
        B=B,
        C=C,
        Gamma=np.asarray(frame.Gamma),
        Gamma_xi=np.asarray(frame.Gamma_xi),
        g=g,
        b0=b0,
        b_fn=b_fn,
        t=t,
        s=s,
    )


def el_residual(coeffs: ElCoefficients, y: np.ndarray, u_grid: np.ndarray) -> float:
    """Max norm of ``(1+nu)[C y'' + B y' - A y] - g`` by central differences.

    ``y`` must be sampled on a uniform grid (shape ``(n, 2)``); boundary rows
    are excluded.  Central differences are second order, so the residual of
    an exact solution shrinks like the squared grid step.
    """
    y = np.asarray(y, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)
    if u_grid.size < 10:
        raise GridError(f"residual check needs at least 10 grid points, got {u_grid.size}")
    h = u_grid[1] - u_grid[0]
    if not np.allclose(np.diff(u_grid), h, rtol=1e-9, atol=1e-12):
        raise GridError("residual check requires a uniform grid")
    ydot = (y[2:] - y[:-2]) / (2.0 * h)
    yddot = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / h**2
    ymid = y[1:-1]
    gs = np.array([coeffs.g(u) for u in u_grid[1:-1]])
    resid = (1.0 + coeffs.nu) * (
        yddot @ coeffs.C.T + ydot @ coeffs.B.T - ymid @ coeffs.A.T
    ) - gs
    return float(np.linalg.norm(resid, axis=1).max())
