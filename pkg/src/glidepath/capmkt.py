"""Three-factor capital market: parameters, risk-premium frame, bond market.

The market has a mean-reverting short rate (Ornstein-Uhlenbeck under both
measures, so the bond market prices by the Vasicek formula), a mean-reverting
equity surplus return perfectly anti-correlated with equity shocks, and a
two-dimensional Brownian driver with correlation ``rho``.

All rates and times are in years; no calendar conventions.  Every container
is frozen and every function is pure, so values can be shared freely across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonError, MaturityError, ParameterError

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
]

# relative tolerance for the pairwise-distinctness checks; the frame formulas
# contain 1/(a - kappa) style factors, so coincident speeds are hard errors
_DISTINCT_RTOL = 1e-12


def _check_distinct(name_x, x, name_y, y):
    if abs(x - y) <= _DISTINCT_RTOL * max(abs(x), abs(y)):
        raise ParameterError(
            f"mean-reversion speeds {name_x}={x} and {name_y}={y} must differ "
            f"(relative tolerance {_DISTINCT_RTOL})"
        )


@dataclass(frozen=True)
class ModelParams:
    """The ten scalar market parameters.

    Attributes
    ----------
    kappa, rbar, sigma_r : float
        Short-rate mean-reversion speed, mean level and volatility under
        the real-world measure.
    a, b : float
        Short-rate mean-reversion speed and mean level under the pricing
        measure (the Vasicek parameters of the bond market).
    alpha, xbar, sigma_x : float
        Equity surplus-return mean-reversion speed, mean level and
        volatility.
    sigma_S : float
        Equity volatility.
    rho : float
        Correlation between the rate and equity Brownian drivers.
    """

    kappa: float
    rbar: float
    sigma_r: float
    a: float
    b: float
    alpha: float
    xbar: float
    sigma_x: float
    sigma_S: float
    rho: float

    def __post_init__(self):
        for name in ("sigma_r", "sigma_x", "sigma_S"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("kappa", "alpha", "a"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.rho**2 < 1:
            raise ParameterError(f"rho^2 must be < 1, got rho={self.rho}")
        _check_distinct("kappa", self.kappa, "a", self.a)
        _check_distinct("kappa", self.kappa, "alpha", self.alpha)
        _check_distinct("alpha", self.alpha, "a", self.a)

    @property
    def alpha_prime(self) -> float:
        """Effective equity reversion speed after the surplus-return hedge."""
        return self.alpha - self.sigma_x / self.sigma_S

    def correlation(self) -> np.ndarray:
        """2x2 driver correlation matrix."""
        return np.array([[1.0, self.rho], [self.rho, 1.0]])


@dataclass(frozen=True)
class MarketState:
    """Initial short rate and surplus return at time ``t``, horizon date ``s``."""

    r_t: float
    x_t: float
    t: float
    s: float

    def __post_init__(self):
        if not self.s > self.t:
            raise HorizonError(f"horizon s={self.s} must exceed start t={self.t}")

    @property
    def horizon(self) -> float:
        return self.s - self.t


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RiskPremiumFrame:
    """Vectors and matrices of the risk-premium decomposition.

    ``xi_s = xibar + exp(-Gamma (s-t)) xi_t + Xi * (OU noise)`` with diagonal
    ``Gamma = diag(kappa, alpha)`` and ``Xi = diag(a - kappa, -sigma_x/sigma_S)``.
    ``eta_r = Xi @ eps1 = (sigma_r, 0)``.
    """

    xibar: np.ndarray
    xi_t: np.ndarray
    Xi: np.ndarray
    Gamma: np.ndarray
    C: np.ndarray
    eps0: float
    eps1: np.ndarray
    eta_r: np.ndarray = field(repr=False)

    @property
    def Gamma_xi(self) -> np.ndarray:
        """Gamma + Xi = diag(a, alpha')."""
        return self.Gamma + self.Xi


def psi(alpha_coef: float, tau):
    """Exponential decay integral (1 - exp(-alpha*tau)) / alpha.

    Total function: at ``alpha_coef == 0`` returns ``tau`` (the analytic
    limit).  ``tau`` may be a scalar or an array.
    """
    tau = np.asarray(tau, dtype=float)
    if alpha_coef == 0.0:
        return tau if tau.ndim else float(tau)
    out = -np.expm1(-alpha_coef * tau) / alpha_coef
    return out if out.ndim else float(out)


def upsilon(a_coef: float, tau):
    """Integrated squared psi: (tau - 2 psi_a(tau) + psi_2a(tau)) / a^2.

    Strictly positive for tau > 0.  The closed form cancels catastrophically
    for small ``a*tau``, so that regime switches to the Taylor expansion in
    ``a*tau`` (crossover chosen where both branches are ~1e-10 accurate).
    """
    if not a_coef > 0:
        raise ParameterError(f"upsilon requires a positive speed, got {a_coef}")
    tau = np.asarray(tau, dtype=float)
    z = a_coef * tau
    series = tau**3 * (
        1.0 / 3.0 - z / 4.0 + 7.0 * z**2 / 60.0 - z**3 / 24.0
    )
    closed = (tau - 2.0 * psi(a_coef, tau) + psi(2.0 * a_coef, tau)) / a_coef**2
    out = np.where(z < 3e-3, series, closed)
    return out if out.ndim else float(out)


def build_frame(p: ModelParams, st: MarketState) -> RiskPremiumFrame:
    """Assemble the risk-premium frame for the given parameters and state."""
    xibar = np.array([p.a * (p.rbar - p.b) / p.sigma_r, p.xbar / p.sigma_S])
    xi_t = np.array(
        [(st.r_t - p.rbar) * (p.a - p.kappa) / p.sigma_r, (st.x_t - p.xbar) / p.sigma_S]
    )
    Xi = np.diag([p.a - p.kappa, -p.sigma_x / p.sigma_S])
    Gamma = np.diag([p.kappa, p.alpha])
    eps0 = (p.a * p.b - p.rbar * p.kappa) / (p.a - p.kappa)
    eps1 = np.array([p.sigma_r / (p.a - p.kappa), 0.0])
    eta_r = Xi @ eps1
    return RiskPremiumFrame(
        xibar=_readonly(xibar),
        xi_t=_readonly(xi_t),
        Xi=_readonly(Xi),
        Gamma=_readonly(Gamma),
        C=_readonly(p.correlation()),
        eps0=eps0,
        eps1=_readonly(eps1),
        eta_r=_readonly(eta_r),
    )


def risk_premium_moments(frame: RiskPremiumFrame, p: ModelParams, tau: float):
    """Conditional mean and covariance of the risk premium ``tau`` years out.

    Returns
    -------
    mean : (2,) ndarray
        ``xibar + exp(-Gamma tau) xi_t`` (elementwise exponential of the
        diagonal; no general matrix exponential is needed here).
    cov : (2, 2) ndarray
        ``Xi @ V @ Xi`` where V carries ``psi_{2kappa}``, ``psi_{kappa+alpha}``
        and ``psi_{2alpha}`` entries.  Symmetric positive semidefinite.
    """
    decay = np.exp(-np.diag(frame.Gamma) * tau)
    mean = frame.xibar + decay * frame.xi_t
    v_rr = psi(2.0 * p.kappa, tau)
    v_rs = p.rho * psi(p.kappa + p.alpha, tau)
    v_ss = psi(2.0 * p.alpha, tau)
    V = np.array([[v_rr, v_rs], [v_rs, v_ss]])
    cov = frame.Xi @ V @ frame.Xi
    return mean, cov


def zero_coupon_rate(p: ModelParams, r_t: float, tau: float) -> float:
    """Vasicek zero-coupon rate for time to maturity ``tau``."""
    if not tau > 0:
        raise HorizonError(f"zero-coupon rate needs tau > 0, got {tau}")
    return (
        p.b
        + (r_t - p.b) / tau * psi(p.a, tau)
        - p.sigma_r**2 / (2.0 * tau) * upsilon(p.a, tau)
    )


def bond_volatility(p: ModelParams, u: float, maturity: float) -> float:
    """Volatility loading of a zero-coupon bond maturing at ``maturity``.

    Always <= 0 (bond prices fall when rates rise); zero only for the
    maturing bond.
    """
    if maturity < u:
        raise MaturityError(f"bond maturity {maturity} lies before valuation time {u}")
    return -psi(p.a, maturity - u) * p.sigma_r
