"""Density matrices on the truncated two-mode Fock space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fock
from .errors import DimensionError, PositivityError

TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-10
POSITIVITY_SLACK = 1e-8


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace operator on a truncated Fock space.

    ``cutoffs`` holds the per-mode n_max values; the matrix dimension is the
    product of (n_max + 1). ``meta`` carries provenance (parameter hashes,
    solver diagnostics) and is ignored in comparisons.
    """

    data: np.ndarray
    cutoffs: tuple[int, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = self.dim
        if self.data.shape != (d, d):
            raise DimensionError(
                f"matrix shape {self.data.shape} does not match cutoffs "
                f"{self.cutoffs} (expected {(d, d)})"
            )

    @property
    def dim(self) -> int:
        return int(np.prod([n + 1 for n in self.cutoffs]))

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cutoffs)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.data)[0])

    def validate(self, trace_tol: float = TRACE_TOL,
                 herm_tol: float = HERMITICITY_TOL,
                 positivity_slack: float = POSITIVITY_SLACK) -> "DensityMatrix":
        """Check the type invariants; returns self so calls can be chained."""
        defect = self.hermiticity_defect()
        if defect > herm_tol:
            raise PositivityError(f"hermiticity defect {defect:.3e} > {herm_tol:.1e}")
        tr = self.trace()
        if abs(tr - 1.0) > trace_tol:
            raise PositivityError(f"trace {tr} deviates from 1 by more than {trace_tol:.1e}")
        lam_min = self.min_eigenvalue()
        if lam_min < -positivity_slack:
            raise PositivityError(
                f"minimum eigenvalue {lam_min:.3e} below -{positivity_slack:.1e}"
            )
        return self

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(0.5 * (self.data + self.data.conj().T),
                             self.cutoffs, dict(self.meta))


def vacuum(cutoffs) -> DensityMatrix:
    """Projector on |0, ..., 0>."""
    cutoffs = tuple(int(n) for n in cutoffs)
    d = int(np.prod([n + 1 for n in cutoffs]))
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(rho, cutoffs)


def fock_projector(cutoffs, occupations) -> DensityMatrix:
    """Projector on the number state |n1, n2, ...>."""
    cutoffs = tuple(int(n) for n in cutoffs)
    dims = [n + 1 for n in cutoffs]
    idx = 0
    for n, d in zip(occupations, dims):
        if not 0 <= n < d:
            raise DimensionError(f"occupation {n} outside cutoff {d - 1}")
        idx = idx * d + n
    d_tot = int(np.prod(dims))
    rho = np.zeros((d_tot, d_tot), dtype=complex)
    rho[idx, idx] = 1.0
    return DensityMatrix(rho, cutoffs)


def coherent_projector(cutoffs, alphas, max_deficit: float = 0.01) -> DensityMatrix:
    """Projector on the product coherent state |alpha_1> x |alpha_2> x ..."""
    cutoffs = tuple(int(n) for n in cutoffs)
    vec = np.array([1.0 + 0.0j])
    for alpha, n_max in zip(alphas, cutoffs):
        vec = np.kron(vec, fock.coherent_state_vector(alpha, n_max,
                                                      max_deficit=max_deficit))
    return DensityMatrix(np.outer(vec, vec.conj()), cutoffs)


def from_vector(v: np.ndarray, cutoffs, meta: dict | None = None) -> DensityMatrix:
    """Unstack a column-major vectorized density matrix."""
    cutoffs = tuple(int(n) for n in cutoffs)
    d = int(np.prod([n + 1 for n in cutoffs]))
    if v.size != d * d:
        raise DimensionError(f"vector length {v.size} does not match dim {d}^2")
    return DensityMatrix(np.asarray(v).reshape((d, d), order="F"),
                         cutoffs, meta or {})


def to_vector(rho: DensityMatrix) -> np.ndarray:
    """Column-major (column-stacking) vectorization."""
    return rho.data.flatten(order="F")
