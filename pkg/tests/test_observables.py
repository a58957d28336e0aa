import math

import numpy as np
import pytest

from conftest import random_density_matrix, random_product_state, random_single_mode

from dimer_dtc import fock
from dimer_dtc.errors import CutoffError, DimensionError, PositivityError
from dimer_dtc.meanfield import LimitCycle
from dimer_dtc.model import build_operators
from dimer_dtc.observables import (
    expectation,
    log_negativity,
    report,
    time_averaged_rho,
    trace_distance,
    von_neumann_entropy,
)
from dimer_dtc.states import DensityMatrix, coherent_projector, fock_projector, vacuum


def test_expectation_vacuum_number():
    ops = build_operators((3, 3))
    assert expectation(vacuum((3, 3)), ops.n1) == 0.0


def test_expectation_identity_is_trace(rng):
    rho = random_density_matrix(rng, (3, 2))
    ident = fock.identity(rho.dim)
    assert expectation(rho, ident).real == pytest.approx(1.0, abs=1e-10)


def test_expectation_coherent_occupation():
    alpha = 1.1 + 0.5j
    rho = coherent_projector((25, 1), (alpha, 0.0))
    ops = build_operators((25, 1))
    n1 = expectation(rho, ops.n1).real
    assert n1 == pytest.approx(abs(alpha) ** 2, rel=1e-8)


def test_expectation_dimension_mismatch(rng):
    rho = random_density_matrix(rng, (2, 2))
    with pytest.raises(DimensionError):
        expectation(rho, fock.identity(5))


def test_log_negativity_product_states(rng):
    for _ in range(10):
        rho = random_product_state(rng, (3, 3))
        assert log_negativity(rho) == 0.0


def test_log_negativity_bell_pair():
    # (|00> + |11>)/sqrt(2) embedded in a 2x2-photon space
    vec = np.zeros(4, dtype=complex)
    vec[fock.composite_index(0, 0, 2)] = 1 / math.sqrt(2)
    vec[fock.composite_index(1, 1, 2)] = 1 / math.sqrt(2)
    rho = DensityMatrix(np.outer(vec, vec.conj()), (1, 1))
    assert log_negativity(rho) == pytest.approx(1.0, abs=1e-12)


def test_log_negativity_subsystem_symmetry(rng):
    for _ in range(10):
        rho = random_density_matrix(rng, (2, 3))
        e1 = log_negativity(rho, transposed_subsystem=1)
        e2 = log_negativity(rho, transposed_subsystem=2)
        assert abs(e1 - e2) < 1e-10


def test_log_negativity_rejects_non_hermitian():
    data = np.eye(4, dtype=complex)
    data[0, 1] = 1.0
    with pytest.raises(PositivityError):
        log_negativity(DensityMatrix(data / np.trace(data), (1, 1)))


def test_entropy_pure_state():
    assert von_neumann_entropy(vacuum((3, 3))) == pytest.approx(0.0, abs=1e-10)


def test_entropy_maximally_mixed():
    d = 12
    rho = DensityMatrix(np.eye(d, dtype=complex) / d, (2, 3))
    assert von_neumann_entropy(rho) == pytest.approx(math.log(d), abs=1e-10)


def test_entropy_block_example():
    data = np.zeros((8, 8), dtype=complex)
    data[0, 0] = 0.5          # |0,0><0,0| / 2
    idx = fock.composite_index(1, 0, 4)
    data[idx, idx] = 0.5      # |1,0><1,0| / 2
    rho = DensityMatrix(data, (1, 3))
    assert von_neumann_entropy(rho) == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_additive_on_products(rng):
    for _ in range(5):
        a = random_single_mode(rng, 3)
        b = random_single_mode(rng, 2)
        s_a = -np.sum(np.linalg.eigvalsh(a) * np.log(np.linalg.eigvalsh(a)))
        s_b = -np.sum(np.linalg.eigvalsh(b) * np.log(np.linalg.eigvalsh(b)))
        rho = DensityMatrix(np.kron(a, b), (3, 2))
        assert von_neumann_entropy(rho) == pytest.approx(s_a + s_b, abs=1e-8)


def test_entropy_positivity_guard():
    data = np.diag([1.2, -2e-4, -0.1998, 0.0]).astype(complex)
    with pytest.raises(PositivityError):
        von_neumann_entropy(DensityMatrix(data, (1, 1)))


def test_trace_distance_basics(rng):
    rho = random_density_matrix(rng, (2, 2))
    assert trace_distance(rho, rho) == 0.0
    a = fock_projector((2, 2), (0, 0))
    b = fock_projector((2, 2), (1, 1))
    assert trace_distance(a, b) == pytest.approx(1.0, abs=1e-12)
    c = random_density_matrix(rng, (2, 2))
    assert trace_distance(rho, c) == pytest.approx(trace_distance(c, rho), abs=1e-14)


def _constant_cycle(alpha_1, alpha_2, period=5.0, samples=64):
    t = np.linspace(0.0, period, samples, endpoint=False)
    return LimitCycle(period=period, times=t,
                      alpha_1=np.full(samples, alpha_1, dtype=complex),
                      alpha_2=np.full(samples, alpha_2, dtype=complex),
                      crossing_spread=0.0)


def test_time_average_of_fixed_point_is_coherent():
    cycle = _constant_cycle(1.2, -0.7j)
    rho = time_averaged_rho(cycle, samples=16)
    assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-9)
    ref = coherent_projector(rho.cutoffs, (1.2, -0.7j))
    assert trace_distance(rho, ref) < 1e-9


def test_time_average_two_orthogonal_coherent_states():
    period, samples = 2.0, 64
    t = np.linspace(0.0, period, samples, endpoint=False)
    alpha = np.where(t < period / 2, 3.0 + 0.0j, -3.0 + 0.0j)
    cycle = LimitCycle(period=period, times=t, alpha_1=alpha,
                       alpha_2=np.zeros(samples, dtype=complex),
                       crossing_spread=0.0)
    rho = time_averaged_rho(cycle, cutoffs=(30, 2), samples=2)
    assert von_neumann_entropy(rho) == pytest.approx(math.log(2), abs=1e-6)


def test_time_average_matches_cycle_moments():
    period, samples = 7.0, 256
    t = np.linspace(0.0, period, samples, endpoint=False)
    phase = np.exp(2j * np.pi * t / period)
    a1 = (1.5 + 0.4 * phase)
    a2 = (0.8 - 0.3 * phase)
    cycle = LimitCycle(period=period, times=t, alpha_1=a1, alpha_2=a2,
                       crossing_spread=0.0)
    rho = time_averaged_rho(cycle, samples=128)
    ops = build_operators(rho.cutoffs)
    n1 = expectation(rho, ops.n1).real
    n2 = expectation(rho, ops.n2).real
    assert n1 == pytest.approx(np.mean(np.abs(a1) ** 2), rel=0.01)
    assert n2 == pytest.approx(np.mean(np.abs(a2) ** 2), rel=0.01)
    assert log_negativity(rho) == 0.0


def test_time_average_cutoff_guard():
    cycle = _constant_cycle(4.0, 0.0)
    with pytest.raises(CutoffError):
        time_averaged_rho(cycle, cutoffs=(8, 2), samples=4)


def test_report_wiring(rng):
    rho = random_product_state(rng, (3, 3))
    rep = report(rho, u=0.5)
    assert rep.z == rep.n1 - rep.n2
    assert rep.u_n1 == pytest.approx(0.5 * rep.n1)
    assert rep.e_n == 0.0
    assert rep.s > 0.0
