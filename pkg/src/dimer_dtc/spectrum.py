"""Leading Liouvillian eigenvalues, spectral gap, and band-structure search.

Small problems (superoperator dimension <= DENSE_LIMIT) are diagonalized
densely. Larger ones use Arnoldi iteration on the short-time propagator
exp(L tau), applied matrix-free by classical RK4 substepping: the map
lambda -> exp(lambda tau) sends "largest real part" to "largest modulus"
exactly, which is the selection Arnoldi is good at, and it needs no sparse
factorization (direct LU fill on this four-index operator is prohibitive).
Eigenvalues are recovered from Rayleigh quotients of a Ritz projection of
L onto the converged subspace, so no branch unwrapping of the propagator
phase is needed, and every accepted pair is certified by an explicit
residual check on L itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .errors import DegenerateSteadyStateError, SolverConvergenceError
from .model import LiouvillianOperator

DENSE_LIMIT = 4096
ZERO_TOL = 1e-9
NEAR_DEGENERATE_TOL = 1e-6
# Eigenpair residuals are certified relative to the operator's infinity
# norm: absolute residuals cannot beat the departure from normality, while
# the Ritz values themselves agree with dense diagonalization to ~1e-14.
RESIDUAL_RTOL = 1e-8
# RK4 remains stable for |lambda| dt below ~2.8; the Gershgorin radius used
# to size the substeps already overestimates the true spectral radius.
RK4_STABILITY_MARGIN = 2.5


class NearDegenerateGapWarning(UserWarning):
    """A second eigenvalue is close to zero; the reported gap may sit near a
    first-order transition point."""


@dataclass(frozen=True)
class BandStructure:
    """Harmonic comb fitted to the near-imaginary eigenvalues."""

    omega_0: float
    multiples: tuple[int, ...]
    residual: float


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues sorted by descending real part, plus derived quantities.

    ``gap``, ``fundamental_frequency`` and ``band_multiples`` stay None until
    filled in by :func:`liouvillian_gap` / :func:`detect_band_structure`
    (see :func:`analyze`).
    """

    eigenvalues: np.ndarray
    method: str
    gap: float | None = None
    fundamental_frequency: float | None = None
    band_multiples: tuple[int, ...] | None = None

    @property
    def zero_mode(self) -> complex:
        return complex(self.eigenvalues[int(np.argmin(np.abs(self.eigenvalues)))])

    def conjugation_defect(self, trim_boundary: bool = True) -> float:
        """Largest distance from any eigenvalue to the conjugate of its best
        partner (0 for a perfectly conjugation-closed set).

        With ``trim_boundary`` the eigenvalues sharing the smallest retained
        real part are skipped: cutting the list at k can split a conjugate
        pair there, which is an artifact of the truncation, not of the
        spectrum.
        """
        lams = self.eigenvalues
        probe = lams
        if trim_boundary and lams.size > 2:
            boundary = lams.real.min()
            probe = lams[lams.real > boundary + 1e-12]
        defect = 0.0
        for lam in probe:
            defect = max(defect, float(np.min(np.abs(lams - np.conj(lam)))))
        return defect


def _sorted_by_real(lams: np.ndarray) -> np.ndarray:
    order = np.lexsort((-lams.imag, np.abs(lams.imag), -lams.real))
    return lams[order]


def _propagator(lv, tau: float):
    """Matrix-free exp(L tau) by RK4 substeps sized from a Gershgorin bound."""
    radius = float(abs(lv).sum(axis=1).max())
    n_sub = max(1, int(np.ceil(tau * radius / RK4_STABILITY_MARGIN)))
    dt = tau / n_sub

    def matvec(v):
        for _ in range(n_sub):
            k1 = lv @ v
            k2 = lv @ (v + 0.5 * dt * k1)
            k3 = lv @ (v + 0.5 * dt * k2)
            k4 = lv @ (v + dt * k3)
            v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return v

    op = spla.LinearOperator(lv.shape, matvec=matvec, dtype=complex)
    return op, n_sub


def _ritz_refine(lv, vectors: np.ndarray):
    """Rayleigh-Ritz projection of L onto the span of ``vectors``.

    Returns refined eigenvalues, eigenvectors, and their residuals on L.
    """
    q, _ = np.linalg.qr(vectors)
    lq = lv @ q
    small = q.conj().T @ lq
    vals, coeffs = np.linalg.eig(small)
    vecs = q @ coeffs
    vecs /= np.linalg.norm(vecs, axis=0, keepdims=True)
    residuals = np.linalg.norm(lv @ vecs - vecs * vals[None, :], axis=0)
    return vals, vecs, residuals


def leading_eigenvalues(liouv: LiouvillianOperator, k: int = 30,
                        tau: float = 1.0, arnoldi_tol: float = 0.0,
                        residual_rtol: float = RESIDUAL_RTOL,
                        dense_limit: int = DENSE_LIMIT) -> SpectrumResult:
    """The k eigenvalues of L with largest real parts.

    Dense full diagonalization below DENSE_LIMIT rows; otherwise Arnoldi on
    the matrix-free propagator exp(L tau) followed by a Rayleigh-Ritz
    refinement on L. Every returned pair satisfies
    ||L v - lambda v|| < residual_rtol * ||L||_inf.

    Raises
    ------
    SolverConvergenceError
        On Arnoldi non-convergence or insufficient final residuals (the
        achieved residual is attached).
    """
    lv = liouv.matrix
    dim2 = lv.shape[0]
    if k < 2:
        raise ValueError("need at least the steady state and one decaying mode")
    if k > dim2:
        raise ValueError(f"k={k} exceeds the superoperator dimension {dim2}")

    if dim2 <= dense_limit:
        lams = np.linalg.eigvals(lv.toarray())
        lams = _sorted_by_real(lams)[:k]
        return SpectrumResult(eigenvalues=lams, method="dense")
    if k >= dim2 - 1:
        raise ValueError(f"k={k} too large for the Arnoldi solver at "
                         f"dimension {dim2}")

    op, n_sub = _propagator(lv, tau)
    # A few extra Ritz vectors absorb boundary-of-window truncation and keep
    # conjugate pairs intact.
    k_solve = min(k + 6, dim2 - 2)
    try:
        mu, vectors = spla.eigs(op, k=k_solve, which="LM", tol=arnoldi_tol)
    except spla.ArpackNoConvergence as exc:
        raise SolverConvergenceError(
            f"Arnoldi converged only {len(exc.eigenvalues)}/{k_solve} "
            f"propagator eigenpairs (tau={tau}, {n_sub} substeps)"
        ) from exc

    vals, vecs, residuals = _ritz_refine(lv, vectors)
    keep = np.argsort(-vals.real)[:k]
    vals, residuals = vals[keep], residuals[keep]
    worst = float(np.max(residuals))
    scale = max(1.0, float(abs(lv).sum(axis=1).max()))
    if worst > residual_rtol * scale:
        raise SolverConvergenceError(
            f"eigenpair residual on L above {residual_rtol:.1e} * {scale:.3g}",
            residual=worst)
    return SpectrumResult(eigenvalues=_sorted_by_real(vals), method="arnoldi")


def liouvillian_gap(spectrum: SpectrumResult, zero_tol: float = ZERO_TOL) -> float:
    """|Re lambda_1| after removing the single steady-state eigenvalue.

    Warns with NearDegenerateGapWarning when the slowest decaying eigenvalue
    is itself close to zero (|lambda_1| < NEAR_DEGENERATE_TOL).

    Raises
    ------
    DegenerateSteadyStateError
        If more than one eigenvalue lies within ``zero_tol`` of zero.
    """
    lams = spectrum.eigenvalues
    zero_mask = np.abs(lams) < zero_tol
    n_zero = int(np.count_nonzero(zero_mask))
    if n_zero == 0:
        raise ValueError("spectrum does not contain the steady-state eigenvalue")
    if n_zero > 1:
        raise DegenerateSteadyStateError(
            f"{n_zero} eigenvalues within {zero_tol:.1e} of zero"
        )
    rest = lams[~zero_mask]
    if rest.size == 0:
        raise ValueError("need at least one nonzero eigenvalue")
    lam_1 = rest[int(np.argmax(rest.real))]
    if abs(lam_1) < NEAR_DEGENERATE_TOL:
        warnings.warn(
            f"slowest decaying eigenvalue {lam_1:.3e} is nearly degenerate "
            "with the steady state", NearDegenerateGapWarning)
    return float(abs(lam_1.real))


def detect_band_structure(spectrum: SpectrumResult, re_tolerance: float,
                          fit_tolerance: float = 0.05,
                          zero_tol: float = ZERO_TOL) -> BandStructure | None:
    """Fit Im(lambda_j) ~ m_j * omega_0 over the near-imaginary eigenvalues.

    Eigenvalues with |Re| < re_tolerance (kappa units) participate. Returns
    None when fewer than three participate, when none oscillates, or when
    the best integer-comb fit misses by more than ``fit_tolerance`` of
    omega_0.
    """
    lams = spectrum.eigenvalues
    near = lams[np.abs(lams.real) < re_tolerance]
    if near.size < 3:
        return None
    ims = near.imag
    positive = np.sort(ims[ims > zero_tol])
    if positive.size == 0:
        return None

    omega = positive[0]
    multiples = None
    for _ in range(4):
        m = np.round(ims / omega).astype(int)
        weight = np.sum(m * m)
        if weight == 0:
            return None
        omega_new = float(np.sum(m * ims) / weight)
        if omega_new <= 0:
            return None
        omega, multiples = omega_new, m
    residual = float(np.max(np.abs(ims - multiples * omega))) / omega
    if residual > fit_tolerance:
        return None
    return BandStructure(omega_0=omega,
                         multiples=tuple(sorted(set(int(v) for v in multiples))),
                         residual=residual)


def analyze(spectrum: SpectrumResult, re_tolerance: float,
            fit_tolerance: float = 0.05) -> SpectrumResult:
    """Convenience wrapper attaching gap and band structure to a spectrum."""
    gap = liouvillian_gap(spectrum)
    band = detect_band_structure(spectrum, re_tolerance, fit_tolerance)
    return replace(
        spectrum, gap=gap,
        fundamental_frequency=None if band is None else band.omega_0,
        band_multiples=None if band is None else band.multiples,
    )
