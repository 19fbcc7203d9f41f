import numpy as np
import pytest

from glidepath.capmkt import MarketState, ModelParams

# Illustrative parameter sets: slow / fast mean reversion in the equity
# risk premium (they differ only in alpha).
SLOW = dict(
    kappa=0.05, rbar=0.02, sigma_r=0.01, a=0.04, b=0.03,
    alpha=0.01, xbar=0.04, sigma_x=0.007, sigma_S=0.15, rho=0.25,
)
FAST = dict(SLOW, alpha=0.25)


@pytest.fixture(scope="session")
def slow_params():
    return ModelParams(**SLOW)


@pytest.fixture(scope="session")
def fast_params():
    return ModelParams(**FAST)


@pytest.fixture
def state10():
    return MarketState(r_t=0.02, x_t=0.04, t=0.0, s=10.0)


@pytest.fixture
def state30():
    return MarketState(r_t=0.02, x_t=0.04, t=0.0, s=30.0)


def random_params(rng, wide=False) -> ModelParams:
    """Draw a valid random parameter set; wide draws span both branches."""
    while True:
        hi = 1.0 if wide else 0.4
        kw = dict(
            kappa=rng.uniform(0.01, hi),
            rbar=rng.uniform(0.0, 0.05),
            sigma_r=rng.uniform(0.002, 0.03),
            a=rng.uniform(0.01, hi),
            b=rng.uniform(0.0, 0.06),
            alpha=rng.uniform(0.01, hi),
            xbar=rng.uniform(0.0, 0.08),
            sigma_x=rng.uniform(0.001, 0.2 if wide else 0.02),
            sigma_S=rng.uniform(0.05, 0.5),
            rho=rng.uniform(-0.95, 0.95),
        )
        try:
            return ModelParams(**kw)
        except Exception:
            continue


def tilted_params(rng) -> ModelParams:
    """Parameter draws tilted toward the complex (D < 0) branch."""
    sign = 1.0 if rng.random() < 0.5 else -1.0
    while True:
        kw = dict(
            kappa=rng.uniform(0.3, 1.2),
            rbar=rng.uniform(0.0, 0.05),
            sigma_r=rng.uniform(0.005, 0.02),
            a=rng.uniform(0.05, 0.4),
            b=rng.uniform(0.0, 0.06),
            alpha=rng.uniform(0.3, 1.2),
            xbar=rng.uniform(0.0, 0.08),
            sigma_x=rng.uniform(0.05, 0.2),
            sigma_S=rng.uniform(0.1, 0.4),
            rho=sign * rng.uniform(0.6, 0.95),
        )
        try:
            return ModelParams(**kw)
        except Exception:
            continue


def draw_spectral_cases(n, seed, horizon=10.0):
    """Valid (coeffs, params, nu) triples covering both discriminant branches.

    Alternates broad draws with draws tilted toward D < 0 so a fixed-size
    sample reliably exercises the complex-conjugate formulas too.
    """
    from glidepath.capmkt import build_frame
    from glidepath.spectral import LambdaMatrixCoeffs, discriminant
    from glidepath.variational import el_coefficients

    rng = np.random.default_rng(seed)
    st = MarketState(0.02, 0.03, 0.0, horizon)
    cases = []
    k = 0
    while len(cases) < n:
        p = tilted_params(rng) if k % 2 else random_params(rng, wide=True)
        k += 1
        nu = 10.0 ** rng.uniform(-2, 2)
        try:
            frame = build_frame(p, st)
            coeffs = LambdaMatrixCoeffs.from_el_coefficients(
                el_coefficients(frame, p, st, nu)
            )
            discriminant(coeffs)
        except Exception:
            continue
        cases.append((coeffs, p, nu))
    return cases


def quartic_roots(coeffs) -> np.ndarray:
    """Companion-matrix oracle for the latent roots of det(M_lambda).

    Expands det(C lam^2 - B lam - A) as the even quartic
    A4 lam^4 + A2 lam^2 + A0 and hands it to numpy's companion-matrix
    root finder.  Independent of the library's closed-form root path.
    """
    a4 = 1.0 - coeffs.rho**2
    a2 = -(coeffs.gamma_r2 + coeffs.gamma_S2 - coeffs.rho**2 * (2 * coeffs.a_nu + coeffs.b_nu**2))
    a0 = coeffs.gamma_r2 * coeffs.gamma_S2 - (coeffs.rho * coeffs.a_nu) ** 2
    return np.roots([a4, 0.0, a2, 0.0, a0])


def sorted_complex(values) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]
