"""Lambda-matrix spectral problem: latent roots and real solvent pairs.

The homogeneous part of the optimality ODE is solved by matrix exponentials
of *solvents*: 2x2 real matrices S with ``C S^2 - B S - A = 0``.  Because the
quartic ``det(C lam^2 - B lam - A)`` is even in ``lam``, its roots come in
pairs ``(+-lam_1, +-lam_2)`` determined by a scalar discriminant ``D``.  For
``D > 0`` the squared roots are real, positive and distinct; for ``D < 0``
they are complex conjugates, yet the solvents are still real.  ``D = 0`` is
rejected.

All spectral arithmetic runs in complex double precision; realness of the
solvents is asserted and then truncated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDiscriminantError, LatentVectorError, NumericError

__all__ = [
    "Branch",
    "LambdaMatrixCoeffs",
    "SpectralSolution",
    "lambda_matrix",
    "discriminant",
    "latent_roots",
    "solvents",
    "expm_solvent",
]

_IMAG_TOL = 1e-10
_COND_LIMIT = 1e12


class Branch(enum.Enum):
    REAL_DISTINCT = "RealDistinct"
    COMPLEX_CONJUGATE = "ComplexConjugate"


@dataclass(frozen=True)
class LambdaMatrixCoeffs:
    """Quadratic matrix-polynomial coefficients ``P(S) = C S^2 - B S - A``.

    Carries the scalar parameterization alongside the matrices because the
    discriminant and latent-vector formulas are written in the scalars.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    gamma_r2: float
    gamma_S2: float
    a_nu: float
    b_nu: float
    rho: float

    @staticmethod
    def from_el_coefficients(coeffs) -> "LambdaMatrixCoeffs":
        return LambdaMatrixCoeffs(
            A=np.asarray(coeffs.A),
            B=np.asarray(coeffs.B),
            C=np.asarray(coeffs.C),
            gamma_r2=coeffs.gamma_r2,
            gamma_S2=coeffs.gamma_S2,
            a_nu=coeffs.a_nu,
            b_nu=coeffs.b_nu,
            rho=coeffs.rho,
        )


@dataclass(frozen=True)
class SpectralSolution:
    """Latent roots, right latent vectors and the real solvent pair.

    ``S1`` has eigenvalues ``(lam_1, lam_2)`` (the principal square roots of
    the squared latent roots), ``S2`` has ``(-lam_1, -lam_2)``, so together
    they exhaust the quartic's root set (a complete solvent pair).
    ``Q1, Q2`` hold the corresponding unit-norm right latent vectors as
    columns.
    """

    D: float
    lambda_sq: tuple
    Lambda: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    branch: Branch
    solvent_residuals: tuple

    @property
    def lambdas(self) -> np.ndarray:
        """Principal latent roots (lam_1, lam_2) as a complex pair."""
        return np.diag(self.Lambda)


def lambda_matrix(coeffs: LambdaMatrixCoeffs, lam: complex) -> np.ndarray:
    """Evaluate ``C lam^2 - B lam - A`` at a complex scalar."""
    lam = complex(lam)
    return coeffs.C * lam**2 - coeffs.B * lam - coeffs.A


def _discriminant_terms(coeffs: LambdaMatrixCoeffs):
    g_r, g_S = coeffs.gamma_r2, coeffs.gamma_S2
    a_nu, b_nu, rho = coeffs.a_nu, coeffs.b_nu, coeffs.rho
    t1 = (1.0 - rho**2) * (g_r - g_S) ** 2
    t2 = rho**2 * (g_r + g_S - (2.0 * a_nu + b_nu**2)) ** 2
    t3 = -(rho**2) * (1.0 - rho**2) * (4.0 * a_nu + b_nu**2) * b_nu**2
    return t1, t2, t3


def discriminant(coeffs: LambdaMatrixCoeffs) -> float:
    """Scalar discriminant deciding the latent-root branch.

    Raises ``DegenerateDiscriminantError`` when |D| is below 1e-14 of its
    natural scale; coincident roots are outside the solution theory.
    """
    t1, t2, t3 = _discriminant_terms(coeffs)
    D = t1 + t2 + t3
    scale = max(
        abs(t1), abs(t2), abs(t3), (coeffs.gamma_r2 + coeffs.gamma_S2) ** 2
    )
    if abs(D) < 1e-14 * scale:
        raise DegenerateDiscriminantError(
            f"degenerate discriminant D={D:.3e} (scale {scale:.3e}); "
            "latent roots coincide"
        )
    return D


def latent_roots(coeffs: LambdaMatrixCoeffs):
    """Squared latent roots ``(lam_1^2, lam_2^2)`` and the branch.

    ``D > 0``: both real, positive, distinct, ordered ``lam_1^2 < lam_2^2``.
    ``D < 0``: complex conjugates; ``lam_1^2`` carries the negative
    imaginary part.
    """
    D = discriminant(coeffs)
    vertex = coeffs.gamma_r2 + coeffs.gamma_S2 - coeffs.rho**2 * (
        2.0 * coeffs.a_nu + coeffs.b_nu**2
    )
    denom = 2.0 * (1.0 - coeffs.rho**2)
    if D > 0:
        root = np.sqrt(D)
        pair = ((vertex - root) / denom, (vertex + root) / denom)
        return pair, Branch.REAL_DISTINCT
    root = np.sqrt(-D)
    l1sq = (vertex - 1j * root) / denom
    return (l1sq, np.conj(l1sq)), Branch.COMPLEX_CONJUGATE


def _latent_vector(coeffs: LambdaMatrixCoeffs, mu: complex) -> np.ndarray:
    # two candidate right latent vectors, one per row of the lambda matrix;
    # pick the larger (ties prefer the first), normalize to unit norm
    rho, a_nu, b_nu = coeffs.rho, coeffs.a_nu, coeffs.b_nu
    mu2 = mu * mu
    cand_a = np.array([rho * (mu2 - a_nu - b_nu * mu), coeffs.gamma_r2 - mu2])
    cand_b = np.array([coeffs.gamma_S2 - mu2, rho * (mu2 - a_nu + b_nu * mu)])
    na, nb = np.linalg.norm(cand_a), np.linalg.norm(cand_b)
    r = cand_a if na >= nb * (1.0 - 1e-12) else cand_b
    n = np.linalg.norm(r)
    if n == 0.0:
        raise LatentVectorError(f"latent vector degenerate at root {mu}")
    return r / n


def _im_formula(lam: complex, r: np.ndarray) -> np.ndarray:
    # real solvent from one complex latent vector: S = Q diag(lam, lam*) Q^-1
    # with Q = [r, r*], written out so the result is exactly real
    r1, r2 = r
    denom = np.imag(r1 * np.conj(r2))
    if denom == 0.0:
        raise LatentVectorError("conjugate latent vectors are collinear")
    m = np.array(
        [
            [lam * r1 * np.conj(r2), np.conj(lam) * abs(r1) ** 2],
            [lam * abs(r2) ** 2, np.conj(lam) * r1 * np.conj(r2)],
        ]
    )
    return np.imag(m) / denom


def _check_condition(Q: np.ndarray, label: str):
    cond = np.linalg.cond(Q)
    if not cond < _COND_LIMIT:
        raise LatentVectorError(
            f"latent vectors of {label} are numerically degenerate "
            f"(condition {cond:.3e})"
        )


def _real_part(M: np.ndarray, label: str) -> np.ndarray:
    resid = np.abs(M.imag).max()
    scale = max(1.0, np.abs(M.real).max())
    if resid > _IMAG_TOL * scale:
        raise NumericError(
            f"{label} has imaginary residue {resid:.3e} beyond tolerance"
        )
    return np.ascontiguousarray(M.real)


def solvents(coeffs: LambdaMatrixCoeffs) -> SpectralSolution:
    """Construct the complete real solvent pair ``(S1, S2)``.

    For ``D > 0`` each solvent is assembled from its latent vectors as
    ``Q diag(...) Q^-1``; for ``D < 0`` the explicit imaginary-part formula
    is used per solvent with that solvent's own latent vector, which is real
    by construction.  Both routes are validated by the polynomial residual
    stored in ``solvent_residuals``.
    """
    (l1sq, l2sq), branch = latent_roots(coeffs)
    l1 = np.sqrt(complex(l1sq))
    l2 = np.sqrt(complex(l2sq))
    if branch is Branch.COMPLEX_CONJUGATE:
        l2 = np.conj(l1)
    Lambda = np.diag([l1, l2])

    r_pos = [_latent_vector(coeffs, l1), _latent_vector(coeffs, l2)]
    r_neg = [_latent_vector(coeffs, -l1), _latent_vector(coeffs, -l2)]
    Q1 = np.column_stack(r_pos)
    Q2 = np.column_stack(r_neg)
    _check_condition(Q1, "S1")
    _check_condition(Q2, "S2")

    if branch is Branch.REAL_DISTINCT:
        S1 = _real_part(Q1 @ Lambda @ np.linalg.inv(Q1), "S1")
        S2 = _real_part(Q2 @ (-Lambda) @ np.linalg.inv(Q2), "S2")
    else:
        S1 = _im_formula(l1, r_pos[0])
        S2 = _im_formula(-l1, r_neg[0])

    def residual(S):
        num = np.linalg.norm(coeffs.C @ S @ S - coeffs.B @ S - coeffs.A)
        ns = np.linalg.norm(S)
        scale = (
            np.linalg.norm(coeffs.A)
            + np.linalg.norm(coeffs.B) * ns
            + np.linalg.norm(coeffs.C) * ns**2
        )
        return num / scale

    return SpectralSolution(
        D=discriminant(coeffs),
        lambda_sq=(complex(l1sq), complex(l2sq)),
        Lambda=Lambda,
        Q1=Q1,
        Q2=Q2,
        S1=S1,
        S2=S2,
        branch=branch,
        solvent_residuals=(residual(S1), residual(S2)),
    )


def _q_lam(sol: SpectralSolution, which: int):
    if which == 1:
        return sol.Q1, np.diag(sol.Lambda)
    if which == 2:
        return sol.Q2, -np.diag(sol.Lambda)
    raise ValueError(f"which must be 1 or 2, got {which}")


def expm_solvent(sol: SpectralSolution, which: int, tau: float) -> np.ndarray:
    """``exp(S_which * tau)`` via the latent eigen-decomposition.

    ``tau = 0`` returns the identity exactly.
    """
    if tau == 0.0:
        return np.eye(2)
    Q, lam = _q_lam(sol, which)
    M = (Q * np.exp(lam * tau)[None, :]) @ np.linalg.inv(Q)
    return _real_part(M, f"exp(S{which} tau)")


def expm_solvent_path(sol: SpectralSolution, which: int, taus: np.ndarray) -> np.ndarray:
    """``exp(S_which * tau)`` for an array of taus, shape (n, 2, 2).

    Expanded as ``sum_k exp(lam_k tau) * outer(Q[:,k], Qinv[k,:])`` so the
    cost is two scalar exponential sweeps.
    """
    taus = np.asarray(taus, dtype=float)
    Q, lam = _q_lam(sol, which)
    Qinv = np.linalg.inv(Q)
    E = np.exp(np.multiply.outer(taus, lam))  # (n, 2)
    M = np.zeros(taus.shape + (2, 2), dtype=complex)
    for k in range(2):
        M += E[..., k, None, None] * np.outer(Q[:, k], Qinv[k, :])
    return _real_part(M, f"exp(S{which} tau) path")
