import math

import numpy as np
import pytest

from conftest import assert_spectra_match, random_density_matrix

from dimer_dtc import fock
from dimer_dtc.errors import DimensionError, MemoryBudgetError
from dimer_dtc.model import (
    DimerParams,
    LiouvillianOperator,
    ScalingPoint,
    apply_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    liouvillian_matrix,
)
from dimer_dtc.states import DensityMatrix, from_vector, to_vector, vacuum


def test_hamiltonian_diagonal_limit():
    p = DimerParams.symmetric(delta=0.7, u=0.0, j=0.0, f=0.0)
    h = build_hamiltonian(p, (3, 3)).toarray()
    occupations = [(n1, n2) for n1 in range(4) for n2 in range(4)]
    expected = np.diag([-0.7 * (n1 + n2) for n1, n2 in occupations])
    assert np.allclose(h, expected, atol=1e-14)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0


def test_hamiltonian_hopping_element():
    j = 1.2
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=j, f=1.5)
    h = build_hamiltonian(p, (2, 2)).toarray()
    bra = fock.composite_index(1, 0, 3)
    ket = fock.composite_index(0, 1, 3)
    assert h[bra, ket] == pytest.approx(-j, abs=1e-15)


def test_hamiltonian_hermitian_random_params(rng):
    for _ in range(20):
        delta_1, delta_2 = rng.uniform(-3, 3, size=2)
        u_1, u_2 = rng.uniform(0, 2, size=2)
        kappa_1, kappa_2 = rng.uniform(0.2, 2, size=2)
        j, f = rng.uniform(0, 3, size=2)
        p = DimerParams(delta_1, delta_2, u_1, u_2, kappa_1, kappa_2, j, f)
        h = build_hamiltonian(p, (5, 4))
        assert abs(h - h.conj().T).max() < 1e-13


def test_params_reject_nonfinite():
    with pytest.raises(ValueError):
        DimerParams.symmetric(delta=float("nan"), u=1.0, j=1.0, f=1.0)
    with pytest.raises(ValueError):
        DimerParams.symmetric(delta=1.0, u=1.0, j=1.0, f=1.0, kappa=0.0)


def test_trace_preservation_columnwise():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    liouv = build_liouvillian(p, (4, 4))
    assert liouv.trace_row_defect() < 1e-12


def test_vacuum_dark_state_without_drive():
    p = DimerParams.symmetric(delta=1.3, u=0.8, j=0.9, f=0.0)
    liouv = build_liouvillian(p, (3, 3))
    vec = to_vector(vacuum((3, 3)))
    assert np.max(np.abs(liouv.matrix @ vec)) < 1e-14


def test_linear_cavity_analytic_spectrum():
    # One empty lossy mode: eigenvalues i delta (m - n) - kappa/2 (m + n)
    # survive truncation exactly because the generator is triangular in the
    # total-occupation grading.
    delta, kappa, n_max = 0.7, 1.0, 3
    h = (-delta) * fock.number_operator(n_max)
    lv = liouvillian_matrix(h, [(kappa, fock.annihilation(n_max))])
    lams = np.linalg.eigvals(lv.toarray())
    expected = [1j * delta * (m - n) - 0.5 * kappa * (m + n)
                for m in range(n_max + 1) for n in range(n_max + 1)]
    assert_spectra_match(lams, expected, tol=1e-12)


def test_apply_matches_matvec(rng):
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    cutoffs = (4, 4)
    rho = random_density_matrix(rng, cutoffs)
    liouv = build_liouvillian(p, cutoffs)
    direct = apply_liouvillian(p, cutoffs, rho)
    via_matrix = from_vector(liouv.matrix @ to_vector(rho), cutoffs).data
    assert np.max(np.abs(direct - via_matrix)) < 1e-12


def test_apply_vacuum_dark():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=0.0)
    out = apply_liouvillian(p, (3, 3), vacuum((3, 3)))
    assert np.max(np.abs(out)) < 1e-14


def test_apply_traceless_and_hermitian(rng):
    p = DimerParams.symmetric(delta=1.0, u=0.5, j=0.7, f=1.1)
    rho = random_density_matrix(rng, (4, 3))
    out = apply_liouvillian(p, (4, 3), rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_apply_dimension_mismatch(rng):
    p = DimerParams.symmetric(delta=1.0, u=0.5, j=0.7, f=1.1)
    rho = random_density_matrix(rng, (3, 3))
    with pytest.raises(DimensionError):
        apply_liouvillian(p, (4, 4), rho)


def test_memory_budget_error_names_bytes():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    with pytest.raises(MemoryBudgetError) as err:
        build_liouvillian(p, (30, 30), max_bytes=10_000)
    assert err.value.required_bytes > 10_000
    assert "bytes" in str(err.value)


def test_scaling_point_drive():
    point = ScalingPoint(u=0.25, f_tilde=1.5)
    assert point.drive(kappa=1.0) == 1.5 / math.sqrt(0.25)
    # u * f^2 is constant along the family
    products = [u * ScalingPoint(u=u, f_tilde=1.5).drive() ** 2
                for u in (1.0, 0.1, 0.01)]
    assert np.allclose(products, 1.5 ** 2, rtol=1e-12)
    with pytest.raises(ValueError):
        ScalingPoint(u=0.0, f_tilde=1.0)


def test_symmetric_special_case():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    assert p.is_symmetric
    q = DimerParams(2.0, 2.5, 1.0, 1.0, 1.0, 1.0, 1.2, 1.5)
    assert not q.is_symmetric


def test_liouvillian_operator_metadata():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    liouv = build_liouvillian(p, (3, 4))
    assert liouv.dim == 4 * 5
    assert liouv.super_dim == liouv.matrix.shape[0]
    assert liouv.vectorization == "column-stacking"


def test_hermiticity_preserved_by_generator(rng):
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    liouv = build_liouvillian(p, (4, 4))
    rho = random_density_matrix(rng, (4, 4))
    out = from_vector(liouv.matrix @ to_vector(rho), (4, 4)).data
    assert np.max(np.abs(out - out.conj().T)) < 1e-12
