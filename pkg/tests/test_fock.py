import math

import numpy as np
import pytest

from dimer_dtc import fock
from dimer_dtc.errors import CutoffError, DimensionError


def test_annihilation_smallest():
    a = fock.annihilation(1).toarray()
    expected = np.zeros((2, 2), dtype=complex)
    expected[0, 1] = 1.0
    assert np.array_equal(a, expected)


def test_annihilation_sqrt_rule():
    a = fock.annihilation(2).toarray()
    assert a[0, 1] == 1.0
    assert a[1, 2] == pytest.approx(math.sqrt(2), abs=0)
    assert np.count_nonzero(a) == 2


def test_commutator_truncation_artifact():
    n_max = 10
    a = fock.annihilation(n_max)
    comm = (a @ a.conj().T - a.conj().T @ a).toarray()
    diag = np.diag(comm).real
    assert np.allclose(diag[:n_max], 1.0, atol=1e-14)
    assert diag[n_max] == pytest.approx(-n_max, abs=1e-12)
    off = comm - np.diag(np.diag(comm))
    assert np.max(np.abs(off)) == 0.0


def test_number_operator_diagonal():
    n = fock.number_operator(2).toarray()
    assert np.array_equal(n, np.diag([0.0, 1.0, 2.0]).astype(complex))


def test_number_equals_adagger_a():
    n_max = 9
    a = fock.annihilation(n_max)
    n = fock.number_operator(n_max)
    assert np.max(np.abs((a.conj().T @ a - n).toarray())) < 1e-14


def test_number_trace_arithmetic_sum():
    n_max = 7
    tr = fock.number_operator(n_max).diagonal().sum()
    assert tr == n_max * (n_max + 1) / 2


def test_kron_identities():
    i2, i3 = fock.identity(2), fock.identity(3)
    assert np.array_equal(fock.kron(i2, i2).toarray(), np.eye(4, dtype=complex))
    assert np.array_equal(fock.kron(i2, i3).toarray(), np.eye(6, dtype=complex))


def test_kron_acts_on_first_mode():
    a = fock.annihilation(1)
    op = fock.kron(a, fock.identity(2))
    ket_10 = np.zeros(4, dtype=complex)
    ket_10[fock.composite_index(1, 0, 2)] = 1.0
    out = op @ ket_10
    ket_00 = np.zeros(4, dtype=complex)
    ket_00[0] = 1.0
    assert np.array_equal(out, ket_00)


def test_kron_nnz_multiplicative(rng):
    a = fock.annihilation(5)
    b = fock.number_operator(4)[1:, 1:]  # no zero entries stored
    assert fock.kron(a, b).nnz == a.nnz * b.nnz


def test_kron_associative():
    a = fock.annihilation(3)
    n = fock.number_operator(2)
    i = fock.identity(2)
    left = fock.kron(fock.kron(a, n), i)
    right = fock.kron(a, fock.kron(n, i))
    assert (left != right).nnz == 0


def test_kron_dimension_limit():
    a = fock.annihilation(40)
    with pytest.raises(DimensionError):
        fock.kron(a, a, dim_limit=1000)


def test_identity_edge_cases():
    assert fock.identity(1).toarray() == np.array([[1.0 + 0.0j]])
    assert np.array_equal(fock.identity(3).toarray(), np.eye(3, dtype=complex))
    with pytest.raises(DimensionError):
        fock.identity(0)


def test_constructors_deterministic():
    a1, a2 = fock.annihilation(6), fock.annihilation(6)
    assert np.array_equal(a1.indices, a2.indices)
    assert np.array_equal(a1.indptr, a2.indptr)
    assert np.array_equal(a1.data, a2.data)


def test_cutoff_validation():
    with pytest.raises(CutoffError):
        fock.FockCutoff(0)
    assert fock.FockCutoff(3).dim == 4


def test_cleanup_drops_arithmetic_noise():
    a = fock.annihilation(4)
    m = a - a + 1e-16 * fock.identity(5)
    cleaned = fock.cleanup(m)
    assert cleaned.nnz == 0


def test_coherent_state_moments():
    alpha = 1.3 - 0.4j
    vec = fock.coherent_state_vector(alpha, 30)
    n_op = np.arange(31)
    mean_n = float(np.sum(n_op * np.abs(vec) ** 2))
    assert mean_n == pytest.approx(abs(alpha) ** 2, rel=1e-10)
    assert np.vdot(vec, vec).real == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_cutoff_guard():
    with pytest.raises(CutoffError):
        fock.coherent_state_vector(4.0, 10)
