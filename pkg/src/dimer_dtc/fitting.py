"""Damped-sinusoid fits of oscillating time series and gap scaling laws.

The fit model is z(t) ~ offset + sum_k A_k exp(-L t) sin(w_k t + phi_k)
with a decay rate L shared by every component (the slow oscillating modes
decay at essentially one rate). Frequencies are seeded by an FFT peak
search; the nonlinear stage optimizes only (L, w_1..w_K) while amplitudes,
phases and the offset are projected out linearly at each step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.signal
import scipy.stats

from .model import DimerParams, ScalingPoint
from .twa import SdeConfig, ensemble_observables, run_ensemble

MAX_COMPONENTS = 5
AMPLITUDE_FLOOR = 1e-3  # relative to the dominant component
HARMONIC_TOL = 0.03


@dataclass(frozen=True)
class DampedOscillationFit:
    """Result of fitting exponentially damped sinusoids to a series.

    ``lambda_gap`` is the shared decay rate; ``fundamental`` the smallest
    fitted frequency; ``multiples`` the nearest integer of each frequency
    over the fundamental, with ``harmonic`` set when every ratio is within
    3% of its integer.
    """

    lambda_gap: float
    frequencies: tuple[float, ...]
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]
    offset: float
    fundamental: float | None
    multiples: tuple[int, ...] | None
    harmonic: bool
    residual: float
    oscillating: bool
    method: str


def _fft_peak_frequencies(t: np.ndarray, y: np.ndarray,
                          max_components: int) -> tuple[np.ndarray, float]:
    dt = float(t[1] - t[0])
    y0 = y - y.mean()
    window = np.hanning(len(y0))
    mag = np.abs(np.fft.rfft(y0 * window))
    omega = 2.0 * np.pi * np.fft.rfftfreq(len(y0), dt)
    floor = 4.0 * float(np.median(mag[1:])) if len(mag) > 2 else np.inf
    peaks, props = scipy.signal.find_peaks(mag, height=floor)
    peaks = peaks[peaks > 0]
    if peaks.size == 0:
        return np.array([]), floor
    order = np.argsort(mag[peaks])[::-1][:max_components]
    return np.sort(omega[peaks[order]]), floor


def _envelope_decay(t: np.ndarray, y: np.ndarray) -> float:
    """Decay rate of |analytic signal| by a log-linear fit (edges trimmed)."""
    env = np.abs(scipy.signal.hilbert(y - y.mean()))
    k = max(1, len(env) // 20)
    env = env[k:-k]
    tt = t[k:-k]
    good = env > 1e-12 * float(np.max(env))
    if np.count_nonzero(good) < 8:
        return 0.0
    slope = scipy.stats.linregress(tt[good], np.log(env[good])).slope
    return max(0.0, -float(slope))


def _design_matrix(t: np.ndarray, lam: float, omegas: np.ndarray) -> np.ndarray:
    cols = [np.ones_like(t)]
    damp = np.exp(-lam * t)
    for w in omegas:
        cols.append(damp * np.sin(w * t))
        cols.append(damp * np.cos(w * t))
    return np.column_stack(cols)


def _project(t, y, lam, omegas):
    m = _design_matrix(t, lam, omegas)
    coef, *_ = np.linalg.lstsq(m, y, rcond=None)
    return coef, m @ coef - y


def fit_damped_oscillations(times, values, t_min: float,
                            max_components: int = 3) -> DampedOscillationFit:
    """Fit the tail (t >= t_min) of a series with damped sinusoids.

    Needs the tail to span at least 5 periods of the dominant FFT peak.
    When no spectral peak rises above the noise floor the series is
    declared non-oscillating and only the envelope decay is reported; if
    the nonlinear stage fails, the FFT frequencies and envelope decay are
    kept (method "envelope").
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    max_components = min(max_components, MAX_COMPONENTS)
    tail = times >= t_min
    if np.count_nonzero(tail) < 16:
        raise ValueError("too few samples past t_min")
    t = times[tail] - t_min
    y = values[tail]

    seeds, _ = _fft_peak_frequencies(t, y, max_components)
    lam0 = _envelope_decay(t, y)
    if seeds.size == 0:
        return DampedOscillationFit(
            lambda_gap=lam0, frequencies=(), amplitudes=(), phases=(),
            offset=float(y.mean()), fundamental=None, multiples=None,
            harmonic=False, residual=0.0, oscillating=False, method="none")

    if t[-1] * seeds[-1] < 5 * 2 * np.pi:
        raise ValueError("series shorter than 5 periods of the dominant "
                         "frequency past t_min")

    nyquist = np.pi / float(t[1] - t[0])
    x0 = np.concatenate([[max(lam0, 1e-4)], seeds])
    lower = np.concatenate([[0.0], np.full(seeds.size, 1e-6)])
    upper = np.concatenate([[10.0], np.full(seeds.size, nyquist)])

    def residual(theta):
        return _project(t, y, theta[0], theta[1:])[1]

    method = "nls"
    try:
        fit = scipy.optimize.least_squares(residual, x0,
                                           bounds=(lower, upper),
                                           method="trf", max_nfev=400)
        if not fit.success or not np.all(np.isfinite(fit.x)):
            raise RuntimeError("nonlinear stage did not converge")
        lam, omegas = float(fit.x[0]), np.sort(fit.x[1:])
    except (RuntimeError, ValueError):
        warnings.warn("damped-sinusoid fit fell back to the envelope decay "
                      "and FFT frequencies", RuntimeWarning)
        method = "envelope"
        lam, omegas = lam0, seeds

    coef, res = _project(t, y, lam, omegas)
    offset = float(coef[0])
    amps, phases = [], []
    for k in range(omegas.size):
        a, bcoef = coef[1 + 2 * k], coef[2 + 2 * k]
        amps.append(float(np.hypot(a, bcoef)))
        phases.append(float(np.arctan2(bcoef, a)))
    amps = np.array(amps)
    keep = amps >= AMPLITUDE_FLOOR * float(np.max(amps))
    omegas, amps = omegas[keep], amps[keep]
    phases = tuple(p for p, flag in zip(phases, keep) if flag)

    scale = float(np.linalg.norm(y - y.mean())) or 1.0
    rel_res = float(np.linalg.norm(res)) / scale
    fundamental = float(omegas[0])
    multiples = tuple(int(round(w / fundamental)) for w in omegas)
    harmonic = all(
        m > 0 and abs(w - m * fundamental) <= HARMONIC_TOL * m * fundamental
        for w, m in zip(omegas, multiples))
    return DampedOscillationFit(
        lambda_gap=float(lam), frequencies=tuple(float(w) for w in omegas),
        amplitudes=tuple(float(a) for a in amps), phases=phases,
        offset=offset, fundamental=fundamental, multiples=multiples,
        harmonic=harmonic, residual=rel_res, oscillating=True, method=method)


@dataclass(frozen=True)
class GapScalingResult:
    """Power-law fit of the decay rate against the interaction strength."""

    eta: float
    eta_stderr: float
    u_values: tuple[float, ...]
    lambdas: tuple[float, ...]
    fits: tuple[DampedOscillationFit, ...]
    skipped: tuple[float, ...]


def gap_scaling(delta: float, j: float, f_tilde: float, u_values,
                config: SdeConfig, t_fit_min: float,
                max_components: int = 3, kappa: float = 1.0,
                workers: int | None = None) -> GapScalingResult:
    """Fit Lambda ~ u^eta from stochastic runs along the scaling family.

    ``u_values`` must contain at least 3 points spanning half a decade.
    Points whose series does not oscillate (or whose fit fails) are skipped
    with a warning; fewer than 3 survivors abort the fit.
    """
    u_values = [float(u) for u in u_values]
    if len(u_values) < 3:
        raise ValueError("need at least 3 interaction strengths")
    if max(u_values) / min(u_values) < math.sqrt(10.0):
        raise ValueError("u values must span at least half a decade")

    lambdas, fits, kept, skipped = [], [], [], []
    for u in sorted(u_values, reverse=True):
        params = ScalingPoint(u=u, f_tilde=f_tilde).dimer_params(delta, j, kappa)
        ensemble = run_ensemble(params, config, workers=workers)
        series = ensemble_observables(ensemble)
        try:
            fit = fit_damped_oscillations(series.times, series.z, t_fit_min,
                                          max_components)
        except ValueError as exc:
            warnings.warn(f"u={u:g}: {exc}", RuntimeWarning)
            skipped.append(u)
            continue
        if not fit.oscillating or fit.lambda_gap <= 0:
            warnings.warn(f"u={u:g}: no usable damped oscillation",
                          RuntimeWarning)
            skipped.append(u)
            continue
        kept.append(u)
        lambdas.append(fit.lambda_gap)
        fits.append(fit)
    if len(kept) < 3:
        raise RuntimeError(f"only {len(kept)} usable points; need >= 3")

    reg = scipy.stats.linregress(np.log(kept), np.log(lambdas))
    return GapScalingResult(
        eta=float(reg.slope), eta_stderr=float(reg.stderr),
        u_values=tuple(kept), lambdas=tuple(lambdas), fits=tuple(fits),
        skipped=tuple(skipped))
