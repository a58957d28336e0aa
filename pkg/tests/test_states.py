import numpy as np
import pytest

from conftest import random_density_matrix

from dimer_dtc.errors import DimensionError, PositivityError
from dimer_dtc.states import (
    DensityMatrix,
    coherent_projector,
    fock_projector,
    from_vector,
    to_vector,
    vacuum,
)


def test_vacuum_projector():
    rho = vacuum((3, 3))
    assert rho.data[0, 0] == 1.0
    assert rho.trace() == 1.0
    assert rho.min_eigenvalue() == pytest.approx(0.0, abs=1e-15)


def test_fock_projector_indexing():
    rho = fock_projector((2, 3), (1, 2))
    idx = 1 * 4 + 2
    assert rho.data[idx, idx] == 1.0
    with pytest.raises(DimensionError):
        fock_projector((2, 3), (3, 0))


def test_validate_catches_bad_trace():
    rho = vacuum((2, 2))
    bad = DensityMatrix(2.0 * rho.data, (2, 2))
    with pytest.raises(PositivityError):
        bad.validate()


def test_validate_catches_negativity():
    data = np.diag([1.5, -0.5, 0.0, 0.0]).astype(complex)
    with pytest.raises(PositivityError):
        DensityMatrix(data, (1, 1)).validate()


def test_validate_accepts_random_mixed(rng):
    random_density_matrix(rng, (3, 2)).validate()


def test_vector_round_trip(rng):
    rho = random_density_matrix(rng, (2, 3))
    back = from_vector(to_vector(rho), (2, 3))
    assert np.array_equal(back.data, rho.data)


def test_vectorization_is_column_stacking():
    data = np.arange(16, dtype=complex).reshape(4, 4)
    rho = DensityMatrix(data, (3,))
    vec = to_vector(rho)
    # column stacking: vec[i + d*j] = rho[i, j]
    assert vec[1] == data[1, 0]
    assert vec[4] == data[0, 1]


def test_coherent_projector_is_pure():
    rho = coherent_projector((12, 12), (0.8, -0.3j))
    evals = np.linalg.eigvalsh(rho.data)
    assert evals[-1] == pytest.approx(1.0, abs=1e-10)
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionError):
        DensityMatrix(np.eye(4, dtype=complex), (3, 3))
