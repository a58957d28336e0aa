"""Mean-field fixed points, linear stability, phase diagrams, and limit cycles.

The coherent-field equations of motion are, in d/dt form,

    d alpha_1/dt = -i [(-delta_1 - i kappa_1/2) alpha_1
                       + u_1 |alpha_1|^2 alpha_1 - j alpha_2 + f_eff]
    d alpha_2/dt = -i [(-delta_2 - i kappa_2/2) alpha_2
                       + u_2 |alpha_2|^2 alpha_2 - j alpha_1]

In the symmetric rescaled form (fields multiplied by sqrt(u)) the
nonlinearity is u' = 1 and the drive is f_eff = f_tilde * kappa^(3/2).

Fixed points are found exactly: eliminating the undriven mode reduces the
coupled system to a degree-9 real polynomial in n_2 = |alpha_2|^2, whose
nonnegative roots are polished by Newton iteration on the full system.
"""

from __future__ import annotations

import cmath
import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.signal
from numpy.polynomial import Polynomial

from .errors import BlowUpError
from .model import DimerParams

RESIDUAL_TOL = 1e-10
DEDUPE_TOL = 1e-8
STABILITY_EPS = 1e-9
FREQUENCY_EPS = 1e-6
BLOW_UP_THRESHOLD = 1e6


class Stability(enum.Enum):
    STABLE = "stable"
    AMPLITUDE_UNSTABLE = "amplitude-unstable"
    PARAMETRICALLY_UNSTABLE = "parametrically-unstable"


@dataclass(frozen=True)
class GPParams:
    """Mean-field parameters; see the module docstring for the equations."""

    delta_1: float
    delta_2: float
    u_1: float
    u_2: float
    kappa_1: float
    kappa_2: float
    j: float
    f_eff: float

    @classmethod
    def symmetric_rescaled(cls, delta: float, j: float, f_tilde: float,
                           kappa: float = 1.0) -> "GPParams":
        """Symmetric dimer in rescaled fields (u' = 1, f_eff = f_tilde k^1.5)."""
        return cls(delta_1=delta, delta_2=delta, u_1=1.0, u_2=1.0,
                   kappa_1=kappa, kappa_2=kappa, j=j,
                   f_eff=f_tilde * kappa ** 1.5)

    @classmethod
    def from_dimer(cls, params: DimerParams) -> "GPParams":
        """Unscaled-field mean-field limit of the quantum model."""
        return cls(delta_1=params.delta_1, delta_2=params.delta_2,
                   u_1=params.u_1, u_2=params.u_2,
                   kappa_1=params.kappa_1, kappa_2=params.kappa_2,
                   j=params.j, f_eff=params.f)


@dataclass(frozen=True)
class GPState:
    alpha_1: complex
    alpha_2: complex


@dataclass(frozen=True)
class GPSolution:
    state: GPState
    stability: Stability
    bogoliubov_rates: tuple[complex, complex, complex, complex]
    residual: float


@dataclass(frozen=True)
class PhaseDiagramCell:
    j: float
    f_tilde: float
    delta: float
    n_solutions: int
    label: str
    stabilities: tuple[Stability, ...]
    error: str | None = None


def gp_rhs(state: GPState, p: GPParams) -> GPState:
    """Time derivative of the coherent fields (d/dt convention)."""
    a1, a2 = state.alpha_1, state.alpha_2
    d1 = -1j * ((-p.delta_1 - 0.5j * p.kappa_1) * a1
                + p.u_1 * abs(a1) ** 2 * a1 - p.j * a2 + p.f_eff)
    d2 = -1j * ((-p.delta_2 - 0.5j * p.kappa_2) * a2
                + p.u_2 * abs(a2) ** 2 * a2 - p.j * a1)
    return GPState(d1, d2)


def _residual(a1: complex, a2: complex, p: GPParams) -> float:
    d = gp_rhs(GPState(a1, a2), p)
    return max(abs(d.alpha_1), abs(d.alpha_2))


def _polish(a1: complex, a2: complex, p: GPParams) -> tuple[complex, complex] | None:
    def fun(v):
        d = gp_rhs(GPState(complex(v[0], v[1]), complex(v[2], v[3])), p)
        return [d.alpha_1.real, d.alpha_1.imag, d.alpha_2.real, d.alpha_2.imag]

    sol = scipy.optimize.root(fun, [a1.real, a1.imag, a2.real, a2.imag],
                              method="hybr", options={"xtol": 1e-13})
    if not sol.success:
        return None
    return complex(sol.x[0], sol.x[1]), complex(sol.x[2], sol.x[3])


def _fixed_point_candidates(p: GPParams) -> list[tuple[complex, complex]]:
    """Closed-form candidates from the polynomial reduction."""
    a1c = complex(-p.delta_1, -0.5 * p.kappa_1)
    a2c = complex(-p.delta_2, -0.5 * p.kappa_2)

    if p.j == 0.0:
        # Mode 2 is empty; mode 1 obeys the single-cavity cubic
        # n |A1 + u1 n|^2 = f^2.
        b = Polynomial([a1c, p.u_1])
        cubic = (Polynomial([0.0, 1.0]) * b * Polynomial(b.coef.conj())
                 - p.f_eff ** 2)
        roots = cubic.roots()
        out = []
        for r in roots:
            if abs(r.imag) > 1e-7 * max(1.0, abs(r.real)) or r.real < -1e-9:
                continue
            n1 = max(float(r.real), 0.0)
            denom = a1c + p.u_1 * n1
            out.append((-p.f_eff / denom, 0.0 + 0.0j))
        return out

    j2 = p.j * p.j
    x = Polynomial([0.0, 1.0])
    b = Polynomial([a2c, p.u_2])                       # A2 + u2 x
    b_abs2 = b * Polynomial(b.coef.conj())             # |A2 + u2 x|^2
    n1_poly = x * b_abs2 / j2                          # n1(x)
    p_poly = (a1c + p.u_1 * n1_poly) * b - j2          # complex, degree 4
    g = x * (p_poly * Polynomial(p_poly.coef.conj())) - p.f_eff ** 2 * j2

    coeffs = g.coef
    # Drop the (numerically zero) imaginary parts of the real polynomial.
    g_real = Polynomial(coeffs.real)
    roots = g_real.roots()
    out = []
    for r in roots:
        if abs(r.imag) > 1e-7 * max(1.0, abs(r.real)) or r.real < -1e-9:
            continue
        n2 = max(float(r.real), 0.0)
        denom = complex(p_poly(n2))
        if denom == 0:
            continue
        alpha_2 = -p.f_eff * p.j / denom
        alpha_1 = (a2c + p.u_2 * n2) * alpha_2 / p.j
        out.append((alpha_1, alpha_2))
    return out


def linearize(solution, p: GPParams) -> np.ndarray:
    """Jacobian of the flow in (d a1, d a1*, d a2, d a2*) (d/dt convention)."""
    state = solution.state if isinstance(solution, GPSolution) else solution
    a1, a2 = state.alpha_1, state.alpha_2
    n1, n2 = abs(a1) ** 2, abs(a2) ** 2
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = -1j * (-p.delta_1 + 2 * p.u_1 * n1) - 0.5 * p.kappa_1
    m[0, 1] = -1j * p.u_1 * a1 * a1
    m[1, 0] = 1j * p.u_1 * np.conj(a1) * np.conj(a1)
    m[1, 1] = 1j * (-p.delta_1 + 2 * p.u_1 * n1) - 0.5 * p.kappa_1
    m[2, 2] = -1j * (-p.delta_2 + 2 * p.u_2 * n2) - 0.5 * p.kappa_2
    m[2, 3] = -1j * p.u_2 * a2 * a2
    m[3, 2] = 1j * p.u_2 * np.conj(a2) * np.conj(a2)
    m[3, 3] = 1j * (-p.delta_2 + 2 * p.u_2 * n2) - 0.5 * p.kappa_2
    m[0, 2] = m[2, 0] = 1j * p.j
    m[1, 3] = m[3, 1] = -1j * p.j
    return m


def classify_stability(rates, eps: float = STABILITY_EPS,
                       eps_omega: float = FREQUENCY_EPS) -> Stability:
    """Stability class from the four linearization eigenvalues.

    Stable when every rate decays (Re < -eps). Otherwise, a non-decaying
    rate with finite oscillation frequency (|Im| > eps_omega) marks a
    parametric instability; purely growing rates an amplitude instability.
    """
    rates = np.asarray(rates)
    unstable = rates[rates.real >= -eps]
    if unstable.size == 0:
        return Stability.STABLE
    if np.any(np.abs(unstable.imag) > eps_omega):
        return Stability.PARAMETRICALLY_UNSTABLE
    return Stability.AMPLITUDE_UNSTABLE


def find_steady_states(p: GPParams, residual_tol: float = RESIDUAL_TOL,
                       dedupe_tol: float = DEDUPE_TOL) -> list[GPSolution]:
    """All fixed points of the flow, classified and deduplicated.

    Candidates come from the exact polynomial reduction; each is polished
    by Newton iteration and kept only if the full residual drops below
    ``residual_tol``.
    """
    accepted: list[tuple[complex, complex]] = []
    for a1, a2 in _fixed_point_candidates(p):
        polished = _polish(a1, a2, p)
        if polished is None:
            warnings.warn(f"fixed-point polish failed near ({a1:.4g}, {a2:.4g})",
                          RuntimeWarning)
            continue
        a1, a2 = polished
        if _residual(a1, a2, p) > residual_tol:
            warnings.warn(f"dropping candidate with residual above "
                          f"{residual_tol:.1e} near ({a1:.4g}, {a2:.4g})",
                          RuntimeWarning)
            continue
        if any(max(abs(a1 - b1), abs(a2 - b2)) < dedupe_tol
               for b1, b2 in accepted):
            continue
        accepted.append((a1, a2))

    accepted.sort(key=lambda ab: (abs(ab[0]) ** 2 + abs(ab[1]) ** 2,
                                  ab[0].real, ab[0].imag, ab[1].real))
    solutions = []
    for a1, a2 in accepted:
        state = GPState(a1, a2)
        rates = np.linalg.eigvals(linearize(state, p))
        rates = rates[np.lexsort((rates.imag, rates.real))]
        solutions.append(GPSolution(
            state=state,
            stability=classify_stability(rates),
            bogoliubov_rates=tuple(complex(r) for r in rates),
            residual=_residual(a1, a2, p),
        ))
    return solutions


def region_label(solutions) -> str:
    """Phase-diagram category from the solution count and stabilities."""
    n = len(solutions)
    any_p = any(s.stability is Stability.PARAMETRICALLY_UNSTABLE
                for s in solutions)
    if n == 1:
        if solutions[0].stability is Stability.STABLE:
            return "1S"
        if any_p:
            return "1P"
    elif n == 3:
        return "3 (with P)" if any_p else "3 (no P)"
    elif n == 5:
        return "5"
    return f"other ({n})"


def _scan_cell(args) -> PhaseDiagramCell:
    j, f_tilde, delta, overrides = args
    p = GPParams.symmetric_rescaled(delta, j, f_tilde)
    if overrides:
        p = GPParams(**{**p.__dict__, **overrides})
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sols = find_steady_states(p)
        return PhaseDiagramCell(
            j=j, f_tilde=f_tilde, delta=delta,
            n_solutions=len(sols), label=region_label(sols),
            stabilities=tuple(s.stability for s in sols),
        )
    except Exception as exc:  # keep scanning; record the failure in-cell
        return PhaseDiagramCell(j=j, f_tilde=f_tilde, delta=delta,
                                n_solutions=0, label="error",
                                stabilities=(), error=str(exc))


def scan_phase_diagram(j_values, f_tilde_values, delta: float,
                       overrides: dict | None = None,
                       workers: int | None = None) -> list[PhaseDiagramCell]:
    """Classify every (j, f_tilde) grid point; j is the slow (row) axis.

    ``overrides`` may replace any GPParams field (e.g. ``delta_2``, ``u_2``,
    ``kappa_2``) to scan an asymmetric dimer; ``f_eff`` stays tied to the
    f_tilde axis. Cells where the solver fails carry the error message and
    the scan continues.
    """
    j_values = [float(v) for v in j_values]
    f_tilde_values = [float(v) for v in f_tilde_values]
    if len(j_values) < 2 or len(f_tilde_values) < 2:
        raise ValueError("grid needs at least 2 points per axis")
    tasks = [(j, f, delta, overrides or {})
             for j in j_values for f in f_tilde_values]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_scan_cell, tasks, chunksize=64))
    else:
        cells = [_scan_cell(t) for t in tasks]
    return cells


@dataclass(frozen=True)
class GPTrajectory:
    times: np.ndarray
    alpha_1: np.ndarray
    alpha_2: np.ndarray

    def window(self, t_min: float, t_max: float | None = None) -> "GPTrajectory":
        mask = self.times >= t_min
        if t_max is not None:
            mask &= self.times <= t_max
        return GPTrajectory(self.times[mask], self.alpha_1[mask],
                            self.alpha_2[mask])


def integrate_gp(initial: GPState, p: GPParams, t_final: float,
                 dt: float = 1e-3, sample_stride: int = 10) -> GPTrajectory:
    """Fixed-step RK4 integration of the mean-field flow.

    Raises
    ------
    BlowUpError
        If either field magnitude exceeds 1e6.
    """
    c1 = complex(0, 1) * p.delta_1 - 0.5 * p.kappa_1
    c2 = complex(0, 1) * p.delta_2 - 0.5 * p.kappa_2
    g1, g2 = -1j * p.u_1, -1j * p.u_2
    jc, fc = 1j * p.j, -1j * p.f_eff

    def rhs(a1, a2):
        return (c1 * a1 + g1 * (a1.real ** 2 + a1.imag ** 2) * a1 + jc * a2 + fc,
                c2 * a2 + g2 * (a2.real ** 2 + a2.imag ** 2) * a2 + jc * a1)

    n_steps = int(round(t_final / dt))
    n_samples = n_steps // sample_stride + 1
    times = np.empty(n_samples)
    out1 = np.empty(n_samples, dtype=complex)
    out2 = np.empty(n_samples, dtype=complex)
    a1 = complex(initial.alpha_1)
    a2 = complex(initial.alpha_2)
    times[0], out1[0], out2[0] = 0.0, a1, a2
    idx = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for step in range(1, n_steps + 1):
        k1a, k1b = rhs(a1, a2)
        k2a, k2b = rhs(a1 + half * k1a, a2 + half * k1b)
        k3a, k3b = rhs(a1 + half * k2a, a2 + half * k2b)
        k4a, k4b = rhs(a1 + dt * k3a, a2 + dt * k3b)
        a1 = a1 + sixth * (k1a + 2 * k2a + 2 * k3a + k4a)
        a2 = a2 + sixth * (k1b + 2 * k2b + 2 * k3b + k4b)
        if step % sample_stride == 0:
            if abs(a1) > BLOW_UP_THRESHOLD or abs(a2) > BLOW_UP_THRESHOLD:
                raise BlowUpError(step * dt, max(abs(a1), abs(a2)))
            times[idx], out1[idx], out2[idx] = step * dt, a1, a2
            idx += 1
    return GPTrajectory(times[:idx], out1[:idx], out2[:idx])


@dataclass(frozen=True)
class LimitCycle:
    """One period of a mean-field limit cycle, uniformly resampled."""

    period: float
    times: np.ndarray
    alpha_1: np.ndarray
    alpha_2: np.ndarray
    crossing_spread: float

    def scaled(self, factor: complex) -> "LimitCycle":
        return LimitCycle(self.period, self.times,
                          factor * self.alpha_1, factor * self.alpha_2,
                          self.crossing_spread)


def _autocorrelation_period(t, signal) -> float | None:
    s = signal - signal.mean()
    n = len(s)
    spec = np.fft.rfft(s, 2 * n)
    ac = np.fft.irfft(spec * np.conj(spec))[:n]
    if ac[0] <= 0:
        return None
    ac /= ac[0]
    peaks, _ = scipy.signal.find_peaks(ac, height=0.1)
    if len(peaks) == 0:
        return None
    return float(t[peaks[0]] - t[0])


def limit_cycle_period(traj: GPTrajectory, transient_cut: float = 200.0,
                       t_max: float | None = None,
                       spread_tol: float = 0.01,
                       resample: int = 256) -> LimitCycle | None:
    """Period of the late-time attractor, or None when there is no cycle.

    A first estimate comes from the autocorrelation peak of Re(alpha_1)
    past the transient; it is refined with the crossing times of a radial
    section through the orbit centroid, requiring the relative spread of
    successive crossing intervals to stay below ``spread_tol``.
    """
    late = traj.window(transient_cut, t_max)
    if late.times.size < 32:
        return None
    a1, a2, t = late.alpha_1, late.alpha_2, late.times
    amplitude = np.max(np.abs(a1 - a1.mean()))
    if amplitude < 1e-9 * max(1.0, float(np.max(np.abs(a1)))):
        return None  # fixed point

    t_auto = _autocorrelation_period(t, a1.real)
    if t_auto is None:
        return None

    # Section: upward crossings of the horizontal ray from the centroid.
    y = (a1 - a1.mean()).imag
    xr = (a1 - a1.mean()).real
    idx = np.nonzero((y[:-1] < 0) & (y[1:] >= 0) & (xr[1:] > 0))[0]
    if idx.size < 4:
        return None
    frac = -y[idx] / (y[idx + 1] - y[idx])
    crossings = t[idx] + frac * (t[idx + 1] - t[idx])
    intervals = np.diff(crossings)

    # The section may be hit several times per period; group accordingly.
    per_period = max(1, int(round(t_auto / np.median(intervals))))
    if per_period > 1:
        m = (intervals.size // per_period) * per_period
        if m == 0:
            return None
        intervals = intervals[:m].reshape(-1, per_period).sum(axis=1)
    if intervals.size < 3:
        return None
    spread = float((intervals.max() - intervals.min()) / intervals.mean())
    if spread > spread_tol:
        return None
    period = float(intervals.mean())

    # Uniformly resample the last complete cycle.
    t_end = crossings[-1]
    t_start = t_end - period
    ts = t_start + np.arange(resample) * (period / resample)
    cyc1 = np.interp(ts, t, a1.real) + 1j * np.interp(ts, t, a1.imag)
    cyc2 = np.interp(ts, t, a2.real) + 1j * np.interp(ts, t, a2.imag)
    return LimitCycle(period=period, times=ts, alpha_1=cyc1, alpha_2=cyc2,
                      crossing_spread=spread)
