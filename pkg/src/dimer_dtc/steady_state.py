"""Steady state of the Liouvillian and a master-equation time integrator.

The primary solver replaces the redundant row of L vec(rho) = 0 by the
trace constraint and solves the augmented system directly. Below
SPLU_LIMIT superoperator rows that is a sparse LU; above it, where LU fill
on this four-index operator becomes prohibitive, the same augmented system
is solved by LGMRES preconditioned with an incomplete LU. A shift-inverted
eigenvector of L nearest zero remains available as a fallback. The
fixed-step RK4 integrator serves as an independent oracle for the linear
solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateSteadyStateError, SolverConvergenceError, StepSizeError
from .model import DimerParams, LiouvillianOperator, apply_liouvillian
from .states import DensityMatrix, from_vector

RESIDUAL_RTOL = 1e-9
ZERO_EIGMODE_TOL = 1e-9
SPLU_LIMIT = 10_000
ILU_DROP_TOL = 1e-4
ILU_FILL_FACTOR = 15


def _trace_row(d: int) -> sp.csr_matrix:
    cols = np.arange(d) * (d + 1)
    data = np.ones(d, dtype=complex)
    rows = np.zeros(d, dtype=int)
    return sp.csr_matrix((data, (rows, cols)), shape=(1, d * d))


def _linf_scale(matrix: sp.spmatrix) -> float:
    return float(abs(matrix).sum(axis=1).max())


def _solve_augmented(lv: sp.csr_matrix, d: int) -> np.ndarray:
    weight = float(np.mean(np.abs(lv.diagonal()))) or 1.0
    augmented = sp.vstack([weight * _trace_row(d), lv[1:]], format="csc")
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = weight
    if augmented.shape[0] <= SPLU_LIMIT:
        return spla.splu(augmented).solve(rhs)
    ilu = spla.spilu(augmented, drop_tol=ILU_DROP_TOL,
                     fill_factor=ILU_FILL_FACTOR)
    precond = spla.LinearOperator(augmented.shape, matvec=ilu.solve,
                                  dtype=complex)
    vec, info = spla.lgmres(augmented, rhs, M=precond, rtol=1e-12, atol=0.0,
                            maxiter=1000)
    if info != 0:
        raise SolverConvergenceError(
            f"preconditioned LGMRES did not converge (info={info})",
            residual=float(np.max(np.abs(augmented @ vec - rhs))))
    return vec


def solve_steady_state(liouv: LiouvillianOperator, method: str = "direct",
                       residual_rtol: float = RESIDUAL_RTOL) -> DensityMatrix:
    """Unique density matrix with L vec(rho) = 0 and Tr(rho) = 1.

    Parameters
    ----------
    liouv : LiouvillianOperator
        Explicit sparse generator.
    method : {"direct", "eigen"}
        "direct" solves the trace-augmented linear system (sparse LU below
        SPLU_LIMIT rows, preconditioned LGMRES above); "eigen" computes the
        eigenvector of L nearest zero by Arnoldi shift-invert and
        trace-normalizes it.

    Raises
    ------
    SolverConvergenceError
        If the residual ||L vec(rho)||_inf exceeds residual_rtol times the
        infinity-norm scale of L.
    DegenerateSteadyStateError
        If a second near-zero eigenvalue is detected (eigen path).
    """
    lv = liouv.matrix.tocsr()
    d = liouv.dim
    if method == "direct":
        try:
            vec = _solve_augmented(lv, d)
        except (RuntimeError, SolverConvergenceError) as exc:
            warnings.warn(f"direct solve failed ({exc}); falling back to the "
                          "shift-inverted eigenvector", RuntimeWarning)
            return solve_steady_state(liouv, method="eigen",
                                      residual_rtol=residual_rtol)
    elif method == "eigen":
        # sigma on the positive real axis is never an eigenvalue of a
        # Lindblad generator, so the shifted matrix is safely nonsingular.
        vals, vecs = spla.eigs(lv, k=2, sigma=1e-6, which="LM", tol=0)
        order = np.argsort(np.abs(vals))
        if abs(vals[order[1]]) < ZERO_EIGMODE_TOL:
            raise DegenerateSteadyStateError(
                f"two eigenvalues within {ZERO_EIGMODE_TOL:.1e} of zero: "
                f"{vals[order[0]]:.3e}, {vals[order[1]]:.3e}"
            )
        vec = vecs[:, order[0]]
        vec = vec / np.trace(vec.reshape((d, d), order="F"))
    else:
        raise ValueError(f"unknown method {method!r}")

    residual = float(np.max(np.abs(lv @ vec)))
    scale = _linf_scale(lv)
    if residual > residual_rtol * scale:
        raise SolverConvergenceError(
            f"steady-state residual exceeds {residual_rtol:.1e} * {scale:.3g}",
            residual=residual,
        )
    rho = from_vector(vec, liouv.cutoffs,
                      meta={"solver": method, "residual": residual})
    rho = rho.hermitized()
    # Invariants are checked, never silently enforced.
    return rho.validate()


@dataclass(frozen=True)
class MasterTrajectory:
    """Density-matrix samples from fixed-step integration."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


# Below this superoperator dimension the integrator works on vectorized
# states with the explicit sparse generator (one matvec instead of eight
# sparse-dense products per stage).
EVOLVE_MATRIX_LIMIT = 30_000


def evolve_master_equation(rho0: DensityMatrix, params: DimerParams,
                           t_final: float, dt: float = 1e-3,
                           sample_stride: int | None = None,
                           trace_tol: float = 1e-6) -> MasterTrajectory:
    """Classical RK4 integration of d rho/dt = L rho.

    Samples every ``sample_stride`` steps (default: ~100 samples total);
    each sample is re-Hermitized as (rho + rho^H)/2.

    Raises
    ------
    StepSizeError
        If |Tr rho - 1| drifts beyond ``trace_tol``.
    """
    from .model import build_liouvillian  # deferred: avoids cycle at import

    cutoffs = rho0.cutoffs
    d = rho0.dim
    n_steps = int(round(t_final / dt))
    if sample_stride is None:
        sample_stride = max(1, n_steps // 100)

    if d * d <= EVOLVE_MATRIX_LIMIT:
        lv = build_liouvillian(params, cutoffs).matrix

        def rhs(state):
            return lv @ state

        state = rho0.data.flatten(order="F")
        unpack = lambda v: v.reshape((d, d), order="F")
    else:
        def rhs(state):
            return apply_liouvillian(params, cutoffs, state)

        state = rho0.data.copy()
        unpack = lambda m: m

    times = [0.0]
    states = [rho0]
    for step in range(1, n_steps + 1):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % sample_stride == 0 or step == n_steps:
            rho = unpack(state)
            drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
            if drift > trace_tol:
                raise StepSizeError(
                    f"trace drifted by {drift:.3e} at t={step * dt:.6g}; "
                    f"reduce dt (currently {dt:g})"
                )
            sample = 0.5 * (rho + rho.conj().T)
            times.append(step * dt)
            states.append(DensityMatrix(sample, cutoffs,
                                        meta={"t": step * dt, "dt": dt}))
    return MasterTrajectory(times=np.asarray(times), states=tuple(states))


def nullspace_dimension_probe(liouv: LiouvillianOperator) -> float:
    """Ratio of the two smallest singular values of the dense generator.

    A well-separated ratio (>= 1e6) certifies a one-dimensional nullspace.
    Intended for small instances only.
    """
    dense = liouv.matrix.toarray()
    singulars = np.linalg.svd(dense, compute_uv=False)
    return float(singulars[-2] / max(singulars[-1], np.finfo(float).tiny))
