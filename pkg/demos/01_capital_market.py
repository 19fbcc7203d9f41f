#!/usr/bin/env python3
"""Tour of the capital market building blocks.

Loads the two bundled parameter sets, prints the risk-premium frame, the
Vasicek yield curve and bond volatilities, and checks the stationary
distribution of the risk premium against its asymptotic form.
"""

import numpy as np

from glidepath import (
    MarketState,
    bond_volatility,
    build_frame,
    psi,
    risk_premium_moments,
    upsilon,
    zero_coupon_rate,
)
from glidepath.cli import builtin_params_path, load_params

slow = load_params(builtin_params_path("slow"))
fast = load_params(builtin_params_path("fast"))
state = MarketState(r_t=0.02, x_t=0.04, t=0.0, s=10.0)

print("=== Parameter sets ===")
for name, p in (("slow", slow), ("fast", fast)):
    print(f"{name}: kappa={p.kappa} a={p.a} alpha={p.alpha} "
          f"alpha'={p.alpha_prime:+.4f} rho={p.rho}")

print("\n=== Decay integrals ===")
for tau in (1.0, 10.0, 30.0):
    print(f"tau={tau:5.1f}  psi_kappa={psi(slow.kappa, tau):8.4f}  "
          f"upsilon_kappa={upsilon(slow.kappa, tau):10.4f}")

print("\n=== Vasicek zero-coupon curve (r_0 = 2%) ===")
print("maturity   yield    bond vol")
for tau in (1, 5, 10, 20, 30, 50):
    y = zero_coupon_rate(slow, 0.02, float(tau))
    bv = bond_volatility(slow, 0.0, float(tau))
    print(f"{tau:6d}   {y:7.4%}  {bv:+8.4f}")

print("\n=== Risk premium: conditional moments from r_0=3%, x_0=2% ===")
frame = build_frame(slow, MarketState(0.03, 0.02, 0.0, 10.0))
print(f"xibar = {frame.xibar.round(4)}   xi_t = {frame.xi_t.round(4)}")
for tau in (1.0, 10.0, 100.0, 1e6):
    mean, cov = risk_premium_moments(frame, slow, tau)
    print(f"tau={tau:>9.0f}  mean={mean.round(4)}  "
          f"sd=({np.sqrt(cov[0, 0]):.4f}, {np.sqrt(cov[1, 1]):.4f})")

asym = np.array(
    [
        [1 / (2 * slow.kappa), slow.rho / (slow.kappa + slow.alpha)],
        [slow.rho / (slow.kappa + slow.alpha), 1 / (2 * slow.alpha)],
    ]
)
_, cov_inf = risk_premium_moments(frame, slow, 1e6)
gap = np.abs(cov_inf - frame.Xi @ asym @ frame.Xi).max()
print(f"\nstationary covariance vs asymptotic formula: max gap {gap:.2e}")
