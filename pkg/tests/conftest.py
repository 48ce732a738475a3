import numpy as np
import pytest

from srcool.params import PhysParams, derive_rates


@pytest.fixture
def fig2_params():
    """Base parameters of the cooling-series presets (single atom variant)."""
    return PhysParams(n_atoms=1, kappa=200.0, delta=100.0, w=0.15, omega_r=0.25, gamma_c=0.1)


@pytest.fixture
def fig2_rates(fig2_params):
    return derive_rates(fig2_params)


def random_moments(rng: np.random.Generator, n: int):
    """A physical-ish random moment set: positive-definite Hermitian matrix."""
    from srcool.spins import SpinMoments

    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = a @ a.conj().T
    m = m / (np.trace(m).real * 1.2)  # populations comfortably inside (0, 1)
    return SpinMoments(np.real(np.diag(m)).copy(), np.triu(m, k=1))
