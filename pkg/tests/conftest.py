import numpy as np
import pytest

from dimer_dtc.states import DensityMatrix


def random_density_matrix(rng, cutoffs) -> DensityMatrix:
    """Random full-rank mixed state on the given truncated space."""
    d = int(np.prod([n + 1 for n in cutoffs]))
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(rho, tuple(cutoffs))


def random_single_mode(rng, n_max: int) -> np.ndarray:
    d = n_max + 1
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_product_state(rng, cutoffs) -> DensityMatrix:
    """rho_1 (x) rho_2 with random mixed single-mode factors."""
    rho = np.kron(random_single_mode(rng, cutoffs[0]),
                  random_single_mode(rng, cutoffs[1]))
    return DensityMatrix(rho, tuple(cutoffs))


def assert_spectra_match(got, expected, tol=1e-9):
    """Compare eigenvalue multisets by nearest-neighbour matching."""
    got = np.asarray(got)
    expected = np.asarray(expected)
    assert got.size == expected.size
    for lam in expected:
        assert np.min(np.abs(got - lam)) < tol, (
            f"expected eigenvalue {lam} missing (closest "
            f"{got[np.argmin(np.abs(got - lam))]})")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
