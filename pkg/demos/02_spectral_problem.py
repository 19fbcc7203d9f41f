#!/usr/bin/env python3
"""The matrix-quadratic spectral problem behind the optimal strategy.

Sweeps risk aversion, tracking the discriminant, latent roots and solvent
residuals, and shows a parameter set where the latent roots turn complex
while the solvents stay real.
"""

import numpy as np

from glidepath import MarketState, ModelParams, build_frame, el_coefficients
from glidepath.cli import builtin_params_path, load_params
from glidepath.spectral import LambdaMatrixCoeffs, discriminant, solvents

state = MarketState(r_t=0.02, x_t=0.04, t=0.0, s=10.0)
slow = load_params(builtin_params_path("slow"))
frame = build_frame(slow, state)

print("=== Slow set: spectral data across risk aversion ===")
print("   nu          D        lam_1     lam_2    residual(S1)  residual(S2)")
for nu in (0.01, 0.1, 1.0, 10.0, 100.0):
    coeffs = LambdaMatrixCoeffs.from_el_coefficients(
        el_coefficients(frame, slow, state, nu)
    )
    sol = solvents(coeffs)
    l1, l2 = sol.lambdas
    print(f"{nu:7.2f}  {sol.D:10.3e}  {l1.real:8.5f}  {l2.real:8.5f}"
          f"  {sol.solvent_residuals[0]:11.2e}  {sol.solvent_residuals[1]:11.2e}")

print("\n=== A complex-conjugate branch example ===")
# strong correlation plus fast mean reversion pushes D below zero
p = ModelParams(kappa=0.76, rbar=0.02, sigma_r=0.01, a=0.12, b=0.03,
                alpha=0.63, xbar=0.04, sigma_x=0.083, sigma_S=0.33, rho=0.37)
frame2 = build_frame(p, state)
coeffs = LambdaMatrixCoeffs.from_el_coefficients(
    el_coefficients(frame2, p, state, 2.2)
)
sol = solvents(coeffs)
print(f"D = {sol.D:.3e}  branch = {sol.branch.value}")
print(f"lambda_1^2 = {sol.lambda_sq[0]:.6f}")
print(f"S1 =\n{sol.S1.round(6)}")
print(f"S2 =\n{sol.S2.round(6)}")
print(f"solvent residuals: {sol.solvent_residuals[0]:.2e}, "
      f"{sol.solvent_residuals[1]:.2e}  (real matrices, complex roots)")

eigs = np.concatenate([np.linalg.eigvals(sol.S1), np.linalg.eigvals(sol.S2)])
print(f"eigenvalues of the pair exhaust the latent roots: {np.sort_complex(eigs)}")
