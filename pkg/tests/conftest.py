import numpy as np
import pytest

from esph.structure import EnergyFunctional, EsPhSystem, OperatorField


def make_es(N, ny, omega=None, rho=None, gamma=None, pi=None, mu=None, sigma=None, H=None, label="test"):
    """Constant-field es-pH system; omitted blocks are zero, H defaults to |x|^2/2."""
    def c(m, r, k, sym="general"):
        return OperatorField.const(np.zeros((r, k)) if m is None else np.asarray(m, float), sym)

    if H is None:
        H = EnergyFunctional(N, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float))
    return EsPhSystem(N, ny, c(omega, N, N, "skew"), c(rho, N, N, "symmetric_psd"), c(gamma, N, ny),
                      c(pi, N, ny), c(mu, ny, ny), c(sigma, ny, ny, "symmetric_psd"), H, label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_psd(rng, r):
    A = rng.normal(size=(r, r + 1))
    return A @ A.T if r else np.zeros((0, 0))


def random_skew(rng, n):
    A = rng.normal(size=(n, n))
    return A - A.T


def random_es_dirac(rng, N=4, ny=2, r1=3, r2=2):
    from esph.dirac import EsDiracSystem
    c = OperatorField.const
    return EsDiracSystem(
        N, ny, r1, r2,
        omega=c(random_skew(rng, N), "skew"), gamma=c(rng.normal(size=(N, ny))),
        tau1=c(rng.normal(size=(N, r1))), tau2=c(rng.normal(size=(ny, r2))),
        mu=c(random_skew(rng, ny), "skew"), phibar=c(random_psd(rng, r1 + r2), "symmetric_psd"),
        hamiltonian=EnergyFunctional(N, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float)),
    )


def random_iso_dirac(rng, N=4, ny=2, r1=3, r2=2):
    from esph.dirac import IsoDiracSystem
    c = OperatorField.const
    return IsoDiracSystem(
        N, ny, r1, r2,
        J=c(random_skew(rng, N), "skew"), G=c(rng.normal(size=(N, ny))),
        T1=c(rng.normal(size=(N, r1))), T2=c(rng.normal(size=(ny, r2))),
        Nf=c(random_skew(rng, ny), "skew"), wbar=c(random_psd(rng, r1 + r2), "symmetric_psd"),
        hamiltonian=EnergyFunctional(N, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, dtype=float)),
    )
