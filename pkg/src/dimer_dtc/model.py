"""Dimer Hamiltonian and Liouvillian on the truncated two-mode space.

All rates are expressed in units of the first cavity's loss rate, so
kappa_1 = 1 in every standard run. The Liouvillian acts on column-stacked
vectorized density matrices: vec(A X B) = (B^T kron A) vec(X), so

    L = -i [(I kron H) - (H^T kron I)]
        + sum_i kappa_i [conj(a_i) kron a_i
                         - 1/2 I kron (n_i) - 1/2 n_i^T kron I].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import fock
from .errors import DimensionError, MemoryBudgetError
from .states import DensityMatrix

# Explicit sparse Liouvillians beyond this budget must be requested with a
# larger max_bytes; matrix-free application has no such limit.
DEFAULT_MEMORY_BUDGET = 3 * 2**30

VECTORIZATION = "column-stacking"


def _require_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"parameter {name} must be finite, got {value}")


@dataclass(frozen=True)
class DimerParams:
    """Physical parameters of the generalized dimer, in units of kappa_1.

    The symmetric model is the special case delta_1 = delta_2, u_1 = u_2,
    kappa_1 = kappa_2. Mode 1 carries the coherent drive.
    """

    delta_1: float
    delta_2: float
    u_1: float
    u_2: float
    kappa_1: float
    kappa_2: float
    j: float
    f: float

    def __post_init__(self):
        _require_finite(delta_1=self.delta_1, delta_2=self.delta_2,
                        u_1=self.u_1, u_2=self.u_2, kappa_1=self.kappa_1,
                        kappa_2=self.kappa_2, j=self.j, f=self.f)
        if self.kappa_1 <= 0 or self.kappa_2 <= 0:
            raise ValueError("loss rates must be positive")

    @classmethod
    def symmetric(cls, delta: float, u: float, j: float, f: float,
                  kappa: float = 1.0) -> "DimerParams":
        return cls(delta_1=delta, delta_2=delta, u_1=u, u_2=u,
                   kappa_1=kappa, kappa_2=kappa, j=j, f=f)

    @property
    def is_symmetric(self) -> bool:
        return (self.delta_1 == self.delta_2 and self.u_1 == self.u_2
                and self.kappa_1 == self.kappa_2)

    def label(self) -> str:
        return (f"d1={self.delta_1:g} d2={self.delta_2:g} u1={self.u_1:g} "
                f"u2={self.u_2:g} k1={self.kappa_1:g} k2={self.kappa_2:g} "
                f"j={self.j:g} f={self.f:g}")


@dataclass(frozen=True)
class ScalingPoint:
    """One member of the large-occupation scaling family.

    The family sends u -> 0 at fixed rescaled drive f_tilde, which keeps
    u * f^2 = f_tilde^2 * kappa^3 constant while occupations grow as 1/u.
    """

    u: float
    f_tilde: float

    def __post_init__(self):
        if not (self.u > 0) or not math.isfinite(self.u):
            raise ValueError(f"u must be positive and finite, got {self.u}")
        _require_finite(f_tilde=self.f_tilde)

    def drive(self, kappa: float = 1.0) -> float:
        """Unscaled drive amplitude f = f_tilde * kappa^(3/2) / sqrt(u)."""
        return self.f_tilde * kappa ** 1.5 / math.sqrt(self.u)

    def dimer_params(self, delta: float, j: float, kappa: float = 1.0) -> DimerParams:
        return DimerParams.symmetric(delta=delta, u=self.u, j=j,
                                     f=self.drive(kappa), kappa=kappa)


@dataclass(frozen=True)
class DimerOperators:
    """Sparse single- and two-mode operators on the composite space."""

    cutoffs: tuple[int, int]
    a1: sp.csr_matrix
    a2: sp.csr_matrix
    ad1: sp.csr_matrix
    ad2: sp.csr_matrix
    n1: sp.csr_matrix
    n2: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.a1.shape[0]


@lru_cache(maxsize=32)
def build_operators(cutoffs: tuple[int, int]) -> DimerOperators:
    """Embed the single-mode ladder operators into the two-mode space."""
    n1_max, n2_max = cutoffs
    a = fock.annihilation(n1_max)
    b = fock.annihilation(n2_max)
    i1 = fock.identity(n1_max + 1)
    i2 = fock.identity(n2_max + 1)
    a1 = fock.kron(a, i2)
    a2 = fock.kron(i1, b)
    return DimerOperators(
        cutoffs=(n1_max, n2_max),
        a1=a1, a2=a2,
        ad1=a1.conj().T.tocsr(), ad2=a2.conj().T.tocsr(),
        n1=fock.kron(fock.number_operator(n1_max), i2),
        n2=fock.kron(i1, fock.number_operator(n2_max)),
    )


def build_hamiltonian(params: DimerParams, cutoffs) -> sp.csr_matrix:
    """Dimer Hamiltonian in the frame rotating with the pump.

    H = sum_i [-delta_i n_i + (u_i/2) ad_i ad_i a_i a_i]
        - j (ad_1 a_2 + a_1 ad_2) + f (ad_1 + a_1)
    """
    return _cached_hamiltonian(params, tuple(int(n) for n in cutoffs))


@lru_cache(maxsize=64)
def _cached_hamiltonian(params: DimerParams, cutoffs: tuple[int, int]) -> sp.csr_matrix:
    ops = build_operators(cutoffs)
    # ad ad a a = n (n - 1)
    kerr1 = ops.n1 @ ops.n1 - ops.n1
    kerr2 = ops.n2 @ ops.n2 - ops.n2
    h = (-params.delta_1 * ops.n1 - params.delta_2 * ops.n2
         + 0.5 * params.u_1 * kerr1 + 0.5 * params.u_2 * kerr2
         - params.j * (ops.ad1 @ ops.a2 + ops.a1 @ ops.ad2)
         + params.f * (ops.ad1 + ops.a1))
    return h.tocsr()


@dataclass(frozen=True)
class LiouvillianOperator:
    """Sparse superoperator L with d(vec rho)/dt = L vec(rho)."""

    matrix: sp.csr_matrix
    dim: int
    cutoffs: tuple[int, ...]
    vectorization: str = VECTORIZATION

    @property
    def super_dim(self) -> int:
        return self.dim * self.dim

    def trace_row_defect(self) -> float:
        """Largest column-normalized entry of vec(I)^H L (0 for a trace-
        preserving generator)."""
        d = self.dim
        vec_i = np.zeros(d * d, dtype=complex)
        vec_i[np.arange(d) * (d + 1)] = 1.0
        row = self.matrix.conj().T @ vec_i
        col_norms = np.sqrt(np.asarray(
            self.matrix.multiply(self.matrix.conj()).sum(axis=0)).ravel().real)
        col_norms[col_norms == 0] = 1.0
        return float(np.max(np.abs(row) / col_norms))


def liouvillian_matrix(h: sp.spmatrix, jumps) -> sp.csr_matrix:
    """Vectorized generator for Hamiltonian ``h`` and jump terms.

    ``jumps`` is an iterable of (rate, operator) pairs contributing
    rate * [c rho c^H - 1/2 {c^H c, rho}] each.
    """
    d = h.shape[0]
    ident = fock.identity(d)
    limit = max(fock.DEFAULT_DIM_LIMIT, (d * d) ** 2 + 1)
    lv = -1j * (fock.kron(ident, h, limit) - fock.kron(h.T, ident, limit))
    for rate, c in jumps:
        cdc = (c.conj().T @ c).tocsr()
        lv = lv + rate * (fock.kron(c.conj(), c, limit)
                          - 0.5 * fock.kron(ident, cdc, limit)
                          - 0.5 * fock.kron(cdc.T, ident, limit))
    return fock.cleanup(lv)


def estimate_liouvillian_bytes(params: DimerParams, cutoffs) -> int:
    """Upper estimate of the CSR storage for the explicit superoperator."""
    cutoffs = tuple(int(n) for n in cutoffs)
    ops = build_operators(cutoffs)
    h = build_hamiltonian(params, cutoffs)
    d = ops.dim
    nnz = 2 * d * h.nnz + ops.a1.nnz ** 2 + ops.a2.nnz ** 2 + 3 * d * d
    return int(nnz * 24)  # complex128 value + int32 index + row-pointer share


def build_liouvillian(params: DimerParams, cutoffs,
                      max_bytes: int = DEFAULT_MEMORY_BUDGET) -> LiouvillianOperator:
    """Explicit sparse Liouvillian of the lossy driven dimer.

    Raises
    ------
    MemoryBudgetError
        If the estimated CSR storage exceeds ``max_bytes``.
    """
    cutoffs = tuple(int(n) for n in cutoffs)
    required = estimate_liouvillian_bytes(params, cutoffs)
    if required > max_bytes:
        raise MemoryBudgetError(required, max_bytes)
    ops = build_operators(cutoffs)
    h = build_hamiltonian(params, cutoffs)
    lv = liouvillian_matrix(h, [(params.kappa_1, ops.a1),
                                (params.kappa_2, ops.a2)])
    return LiouvillianOperator(matrix=lv, dim=ops.dim, cutoffs=cutoffs)


def build_displaced_liouvillian(params: DimerParams, cutoffs, displacements,
                                max_bytes: int = DEFAULT_MEMORY_BUDGET,
                                ) -> LiouvillianOperator:
    """Generator in a frame displaced by coherent amplitudes (beta_1, beta_2).

    Substituting a_i -> a_i + beta_i in both the Hamiltonian and the jump
    operators is a similarity transform of the generator, so the spectrum is
    unchanged; truncating in the displaced basis, however, converges at much
    smaller cutoffs when the state lives far from the Fock origin (large
    occupations at weak nonlinearity). Expectation values of the returned
    frame refer to displaced operators; use this builder for spectra.
    """
    cutoffs = tuple(int(n) for n in cutoffs)
    required = estimate_liouvillian_bytes(params, cutoffs)
    if required > max_bytes:
        raise MemoryBudgetError(required, max_bytes)
    ops = build_operators(cutoffs)
    ident = fock.identity(ops.dim)
    beta_1, beta_2 = complex(displacements[0]), complex(displacements[1])
    a1 = (ops.a1 + beta_1 * ident).tocsr()
    a2 = (ops.a2 + beta_2 * ident).tocsr()
    ad1, ad2 = a1.conj().T.tocsr(), a2.conj().T.tocsr()
    h = (-params.delta_1 * (ad1 @ a1) - params.delta_2 * (ad2 @ a2)
         + 0.5 * params.u_1 * (ad1 @ ad1 @ a1 @ a1)
         + 0.5 * params.u_2 * (ad2 @ ad2 @ a2 @ a2)
         - params.j * (ad1 @ a2 + a1 @ ad2)
         + params.f * (ad1 + a1))
    h = (0.5 * (h + h.conj().T)).tocsr()
    lv = liouvillian_matrix(h, [(params.kappa_1, a1), (params.kappa_2, a2)])
    return LiouvillianOperator(matrix=lv, dim=ops.dim, cutoffs=cutoffs)


def apply_liouvillian(params: DimerParams, cutoffs, rho) -> np.ndarray:
    """Matrix-free action of the generator on a density matrix.

    Returns -i[H, rho] + sum_i kappa_i (a_i rho ad_i - 1/2 {n_i, rho})
    as a dense array. ``rho`` may be a DensityMatrix or a plain array.
    """
    cutoffs = tuple(int(n) for n in cutoffs)
    mat = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    ops = build_operators(cutoffs)
    if mat.shape != (ops.dim, ops.dim):
        raise DimensionError(
            f"rho shape {mat.shape} does not match cutoffs {cutoffs}"
        )
    h = build_hamiltonian(params, cutoffs)
    out = -1j * (h @ mat - mat @ h)
    for kappa, a, n in ((params.kappa_1, ops.a1, ops.n1),
                        (params.kappa_2, ops.a2, ops.n2)):
        out = out + kappa * ((a @ mat) @ a.conj().T
                             - 0.5 * (n @ mat + mat @ n))
    return np.asarray(out)
