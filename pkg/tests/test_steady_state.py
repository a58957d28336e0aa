import math

import numpy as np
import pytest

from dimer_dtc.errors import StepSizeError
from dimer_dtc.model import DimerParams, build_liouvillian, build_operators
from dimer_dtc.observables import expectation, trace_distance
from dimer_dtc.states import fock_projector, vacuum
from dimer_dtc.steady_state import (
    evolve_master_equation,
    nullspace_dimension_probe,
    solve_steady_state,
)


def test_no_drive_steady_state_is_vacuum():
    p = DimerParams.symmetric(delta=1.7, u=0.9, j=1.1, f=0.0)
    liouv = build_liouvillian(p, (4, 4))
    rho = solve_steady_state(liouv)
    assert trace_distance(rho, vacuum((4, 4))) < 1e-10


def test_linear_cavity_coherent_occupation():
    delta, kappa, f = 1.0, 1.0, 0.5
    p = DimerParams.symmetric(delta=delta, u=0.0, j=0.0, f=f, kappa=kappa)
    liouv = build_liouvillian(p, (12, 1))
    rho = solve_steady_state(liouv)
    ops = build_operators((12, 1))
    n1 = expectation(rho, ops.n1).real
    expected = f ** 2 / (delta ** 2 + kappa ** 2 / 4)
    assert n1 == pytest.approx(expected, abs=1e-8)


def test_direct_and_eigen_methods_agree():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.2)
    liouv = build_liouvillian(p, (5, 5))
    rho_direct = solve_steady_state(liouv, method="direct")
    rho_eigen = solve_steady_state(liouv, method="eigen")
    assert trace_distance(rho_direct, rho_eigen) < 1e-9


def test_invariants_validated_on_output():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    rho = solve_steady_state(build_liouvillian(p, (6, 6)))
    assert rho.hermiticity_defect() == 0.0
    assert abs(rho.trace() - 1) < 1e-10
    assert rho.min_eigenvalue() > -1e-8


def test_nullspace_is_one_dimensional():
    for f_tilde in (0.8, 1.5):
        p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=f_tilde)
        liouv = build_liouvillian(p, (3, 3))
        assert nullspace_dimension_probe(liouv) > 1e6


def test_single_photon_decay():
    kappa = 1.0
    p = DimerParams.symmetric(delta=0.0, u=0.0, j=0.0, f=0.0, kappa=kappa)
    rho0 = fock_projector((3, 1), (1, 0))
    traj = evolve_master_equation(rho0, p, t_final=1.0, dt=1e-3,
                                  sample_stride=1000)
    ops = build_operators((3, 1))
    n1 = expectation(traj.final, ops.n1).real
    assert n1 == pytest.approx(math.exp(-kappa * 1.0), abs=1e-6)


def test_steady_state_is_stationary():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    liouv = build_liouvillian(p, (5, 5))
    rho_ss = solve_steady_state(liouv)
    traj = evolve_master_equation(rho_ss, p, t_final=10.0, dt=1e-3)
    assert trace_distance(traj.final, rho_ss) < 1e-7


def test_oracle_equivalence_small_instance():
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    cutoffs = (5, 5)
    liouv = build_liouvillian(p, cutoffs)
    rho_ss = solve_steady_state(liouv)
    traj = evolve_master_equation(vacuum(cutoffs), p, t_final=50.0, dt=2e-3)
    assert trace_distance(traj.final, rho_ss) < 1e-6


def test_rk4_fourth_order_in_dt():
    p = DimerParams.symmetric(delta=1.0, u=0.8, j=0.9, f=1.0)
    rho0 = vacuum((3, 3))
    ref = evolve_master_equation(rho0, p, t_final=1.0, dt=1.25e-4).final
    errors = []
    for dt in (1e-3, 5e-4):
        final = evolve_master_equation(rho0, p, t_final=1.0, dt=dt).final
        errors.append(trace_distance(final, ref))
    ratio = errors[0] / errors[1]
    assert 8.0 < ratio < 40.0


def test_trace_drift_guard():
    # A step far beyond the stability limit destroys the trace immediately.
    p = DimerParams.symmetric(delta=2.0, u=1.0, j=1.2, f=1.5)
    with pytest.raises(StepSizeError):
        evolve_master_equation(vacuum((5, 5)), p, t_final=5.0, dt=0.25,
                               sample_stride=2)
