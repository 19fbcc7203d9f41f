"""Mean-variance optimal deterministic strategies under mean reversion.

The library solves for the pre-committed factor-allocation path that
maximizes expected horizon log return at fixed horizon variance in a market
with a Vasicek short rate and a mean-reverting equity risk premium, by
reducing the calculus-of-variations optimality condition to a 2x2
matrix-quadratic spectral problem with closed-form solvents.

Modules
-------
capmkt      market parameters, risk-premium frame, Vasicek bond market
variational quadrature horizon moments, the y-transform, optimality-ODE data
spectral    lambda-matrix discriminant, latent roots, real solvent pair
solver      particular constants, 4x4 boundary solve, the allocation path
analytics   closed-form moments, efficient frontiers, allocation tables
mcsim       Monte Carlo oracle with exact OU transitions
cli         command-line front end (``glidepath`` entry point)
"""

from .capmkt import (
    MarketState,
    ModelParams,
    RiskPremiumFrame,
    bond_volatility,
    build_frame,
    psi,
    risk_premium_moments,
    upsilon,
    zero_coupon_rate,
)
from .analytics import (
    FrontierPoint,
    HorizonMoments,
    allocation_table,
    closed_form_mean,
    closed_form_variance,
    efficient_frontier,
    horizon_moments,
)
from .mcsim import SimConfig, SimResult, discretization_sweep, simulate
from .solver import (
    OptimalStrategy,
    infinite_nu_allocation,
    optimal_allocation,
    solve_optimal,
    strategy_path,
)
from .spectral import Branch, SpectralSolution
from .variational import (
    ElCoefficients,
    StrategyPath,
    el_coefficients,
    horizon_mean_quadrature,
    horizon_variance_quadrature,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "MarketState",
    "RiskPremiumFrame",
    "psi",
    "upsilon",
    "build_frame",
    "risk_premium_moments",
    "zero_coupon_rate",
    "bond_volatility",
    "StrategyPath",
    "ElCoefficients",
    "el_coefficients",
    "horizon_mean_quadrature",
    "horizon_variance_quadrature",
    "Branch",
    "SpectralSolution",
    "OptimalStrategy",
    "solve_optimal",
    "optimal_allocation",
    "infinite_nu_allocation",
    "strategy_path",
    "HorizonMoments",
    "FrontierPoint",
    "horizon_moments",
    "closed_form_mean",
    "closed_form_variance",
    "efficient_frontier",
    "allocation_table",
    "SimConfig",
    "SimResult",
    "simulate",
    "discretization_sweep",
    "__version__",
]
