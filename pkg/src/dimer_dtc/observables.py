"""Expectation values, entanglement and entropy measures, trace distance,
and the time-averaged density matrix built from a mean-field limit cycle.

Unit conventions: the von Neumann entropy uses the natural logarithm
(nats); the logarithmic negativity uses log base 2 (bits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fock
from .errors import DimensionError, PositivityError
from .model import build_operators
from .states import DensityMatrix

EIGENVALUE_FLOOR = 1e-12
NEGATIVITY_SLACK = 1e-8
HERMITICITY_TOL = 1e-8
# Trace norms this close to 1 are PPT up to roundoff; report exactly zero.
TRACE_NORM_FLOOR = 1e-10


@dataclass(frozen=True)
class ObservableReport:
    """Scalar observables of a two-mode state.

    ``e_n`` is in bits, ``s`` in nats; ``u_n1``/``u_n2`` are the occupation
    numbers rescaled by the interaction strength for large-occupation plots.
    """

    n1: float
    n2: float
    z: float
    e_n: float
    s: float
    u_n1: float
    u_n2: float


def expectation(rho: DensityMatrix, op: sp.spmatrix) -> complex:
    """Tr(O rho)."""
    if op.shape != rho.data.shape:
        raise DimensionError(
            f"operator shape {op.shape} does not match state {rho.data.shape}"
        )
    return complex(op.multiply(rho.data.T).sum())


def partial_transpose(rho: DensityMatrix, subsystem: int = 2) -> np.ndarray:
    """Transpose the chosen mode's indices of a two-mode density matrix."""
    if len(rho.cutoffs) != 2:
        raise DimensionError("partial transpose requires a two-mode state")
    d1, d2 = rho.mode_dims
    blocks = rho.data.reshape(d1, d2, d1, d2)
    if subsystem == 1:
        blocks = blocks.transpose(2, 1, 0, 3)
    elif subsystem == 2:
        blocks = blocks.transpose(0, 3, 2, 1)
    else:
        raise ValueError("subsystem must be 1 or 2")
    return blocks.reshape(d1 * d2, d1 * d2)


def log_negativity(rho: DensityMatrix, transposed_subsystem: int = 2) -> float:
    """log2 of the trace norm of the partial transpose, clamped at 0.

    The trace norm is invariant under which subsystem carries the transpose,
    so both choices give the same value; the parameter is exposed for
    explicitness.
    """
    defect = rho.hermiticity_defect()
    if defect > HERMITICITY_TOL:
        raise PositivityError(f"hermiticity defect {defect:.3e} too large "
                              "for a negativity evaluation")
    pt = partial_transpose(rho, transposed_subsystem)
    mu = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    trace_norm = float(np.sum(np.abs(mu)))
    if trace_norm <= 1.0 + TRACE_NORM_FLOOR:
        return 0.0
    return float(np.log2(trace_norm))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S = -sum p ln p over the eigenvalues of rho.

    Eigenvalues below EIGENVALUE_FLOOR contribute nothing; anything below
    -NEGATIVITY_SLACK raises, since that signals a broken state rather than
    truncation noise.
    """
    p = np.linalg.eigvalsh(0.5 * (rho.data + rho.data.conj().T))
    if p[0] < -NEGATIVITY_SLACK:
        raise PositivityError(f"eigenvalue {p[0]:.3e} below -{NEGATIVITY_SLACK:.1e}")
    p = p[p >= EIGENVALUE_FLOOR]
    return float(-np.sum(p * np.log(p)))


def trace_distance(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """(1/2) sum |eigenvalues| of (rho_a - rho_b)."""
    if rho_a.data.shape != rho_b.data.shape:
        raise DimensionError("states live on different spaces")
    diff = rho_a.data - rho_b.data
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(
        0.5 * (diff + diff.conj().T)))))


def suggested_cutoff(alpha_max: complex) -> int:
    """Per-mode cutoff keeping the truncated-coherent-state norm deficit
    comfortably below 1% for amplitudes up to |alpha_max|."""
    a = abs(alpha_max)
    return int(np.ceil(a * a + 5.0 * a + 10.0))


def time_averaged_rho(cycle, cutoffs=None, samples: int = 64,
                      max_deficit: float = 0.01) -> DensityMatrix:
    """Uniform time average of coherent projectors over one limit cycle.

    ``cycle`` must expose ``period``, ``times``, ``alpha_1`` and ``alpha_2``
    covering exactly one period of the *unscaled* field amplitudes
    <a_i> = alpha_i / sqrt(u). Sampling is uniform on [t0, t0 + period);
    each truncated coherent vector is renormalized, with the deficit guard
    delegated to the Fock expansion.
    """
    times = np.asarray(cycle.times, dtype=float)
    a1 = np.asarray(cycle.alpha_1, dtype=complex)
    a2 = np.asarray(cycle.alpha_2, dtype=complex)
    period = float(cycle.period)
    if cutoffs is None:
        cutoffs = (suggested_cutoff(np.max(np.abs(a1))),
                   suggested_cutoff(np.max(np.abs(a2))))
    cutoffs = tuple(int(n) for n in cutoffs)

    t0 = times[0]
    # Wrap-around interpolation grid covering [t0, t0 + period).
    t_mod = np.concatenate([times - t0, [period]])
    a1_ext = np.concatenate([a1, [a1[0]]])
    a2_ext = np.concatenate([a2, [a2[0]]])
    t_samples = np.arange(samples) * (period / samples)
    a1_s = np.interp(t_samples, t_mod, a1_ext.real) \
        + 1j * np.interp(t_samples, t_mod, a1_ext.imag)
    a2_s = np.interp(t_samples, t_mod, a2_ext.real) \
        + 1j * np.interp(t_samples, t_mod, a2_ext.imag)

    d = (cutoffs[0] + 1) * (cutoffs[1] + 1)
    rho = np.zeros((d, d), dtype=complex)
    for alpha_1, alpha_2 in zip(a1_s, a2_s):
        v1 = fock.coherent_state_vector(alpha_1, cutoffs[0], max_deficit=max_deficit)
        v2 = fock.coherent_state_vector(alpha_2, cutoffs[1], max_deficit=max_deficit)
        vec = np.kron(v1, v2)
        rho += np.outer(vec, vec.conj())
    rho /= samples
    return DensityMatrix(rho, cutoffs, meta={"samples": samples,
                                             "period": period})


def report(rho: DensityMatrix, u: float) -> ObservableReport:
    """Assemble the standard scalar observables of a two-mode state."""
    ops = build_operators(tuple(rho.cutoffs))
    n1 = float(expectation(rho, ops.n1).real)
    n2 = float(expectation(rho, ops.n2).real)
    return ObservableReport(
        n1=n1, n2=n2, z=n1 - n2,
        e_n=log_negativity(rho),
        s=von_neumann_entropy(rho),
        u_n1=u * n1, u_n2=u * n2,
    )
