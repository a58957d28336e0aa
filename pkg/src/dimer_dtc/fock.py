"""Truncated Fock-space operators for bosonic modes.

Single-mode ladder operators on the photon-number basis {|0>, ..., |n_max>}
(dimension d = n_max + 1) and Kronecker embeddings into multi-mode product
spaces. All constructors return CSR matrices with complex128 entries. The
matrices are treated as immutable: share them freely across workers, never
modify entries in place.

Composite-basis convention: mode 1 is the left Kronecker factor, so the
composite index of |n1, n2> is k = n1 * d2 + n2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CutoffError, DimensionError

# Guard against runaway Kronecker products (rows * cols of the result).
DEFAULT_DIM_LIMIT = 10**12

# Entries produced by arithmetic below this magnitude are noise; constructors
# themselves are exact and never drop anything.
CLEANUP_TOL = 1e-15


@dataclass(frozen=True)
class FockCutoff:
    """Maximum photon number retained for one mode."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise CutoffError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return self.n_max + 1


def _as_cutoff(n_max) -> FockCutoff:
    return n_max if isinstance(n_max, FockCutoff) else FockCutoff(n_max)


def annihilation(n_max) -> sp.csr_matrix:
    """Annihilation operator a with a|n> = sqrt(n)|n-1> on the truncated basis.

    Parameters
    ----------
    n_max : int or FockCutoff
        Highest retained photon number (matrix dimension is n_max + 1).
    """
    cut = _as_cutoff(n_max)
    amps = np.sqrt(np.arange(1, cut.dim, dtype=float))
    return sp.diags(amps.astype(complex), offsets=1, format="csr")


def creation(n_max) -> sp.csr_matrix:
    """Creation operator, the conjugate transpose of :func:`annihilation`."""
    return annihilation(n_max).conj().T.tocsr()


def number_operator(n_max) -> sp.csr_matrix:
    """Photon-number operator diag(0, 1, ..., n_max)."""
    cut = _as_cutoff(n_max)
    return sp.diags(np.arange(cut.dim, dtype=complex), offsets=0, format="csr")


def identity(d: int) -> sp.csr_matrix:
    """d x d identity."""
    if d < 1:
        raise DimensionError(f"identity dimension must be >= 1, got {d}")
    return sp.identity(d, dtype=complex, format="csr")


def kron(a, b, dim_limit: int = DEFAULT_DIM_LIMIT) -> sp.csr_matrix:
    """Kronecker product with mode 1 as the left factor.

    Raises
    ------
    DimensionError
        If rows * cols of the result would exceed ``dim_limit``.
    """
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > dim_limit:
        raise DimensionError(
            f"kron result {rows}x{cols} exceeds the dimension limit {dim_limit}"
        )
    return sp.kron(a, b, format="csr")


def cleanup(m: sp.spmatrix, tol: float = CLEANUP_TOL) -> sp.csr_matrix:
    """Drop entries with |value| < tol (use only after arithmetic)."""
    m = m.tocsr().copy()
    m.data[np.abs(m.data) < tol] = 0.0
    m.eliminate_zeros()
    return m


def coherent_state_vector(alpha: complex, n_max, renormalize: bool = True,
                          max_deficit: float = 0.01) -> np.ndarray:
    """Coherent state |alpha> expanded in the truncated number basis.

    The amplitudes c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!) are evaluated
    by the stable recursion c_n = c_{n-1} * alpha / sqrt(n). The truncated
    vector is renormalized to unit norm unless ``renormalize`` is False.

    Raises
    ------
    CutoffError
        If the truncation removes more than ``max_deficit`` of the norm.
    """
    cut = _as_cutoff(n_max)
    c = np.empty(cut.dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cut.dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    norm_sq = float(np.vdot(c, c).real)
    deficit = 1.0 - norm_sq
    if deficit > max_deficit:
        raise CutoffError(
            f"coherent state |alpha|^2={abs(alpha)**2:.3g} loses "
            f"{deficit:.3%} of its norm at n_max={cut.n_max}"
        )
    if renormalize:
        c /= math.sqrt(norm_sq)
    return c


def composite_index(n1: int, n2: int, d2: int) -> int:
    """Composite basis index of |n1, n2> (mode-1 major ordering)."""
    return n1 * d2 + n2
