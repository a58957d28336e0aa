"""Stochastic phase-space trajectories for the driven-dissipative dimer.

Each trajectory integrates, by the Euler-Maruyama scheme,

    d alpha_i = -i [-(delta_i + i kappa_i/2) + u_i (|alpha_i|^2 - 1)] alpha_i dt
                - i f delta_{i,1} dt + i j alpha_{3-i} dt + eta_i

with independent complex Gaussian increments eta_i whose quadratures have
standard deviation sqrt(kappa_i dt)/2, i.e. <eta eta*> = (kappa_i/2) dt.
That diffusion keeps the empty lossy cavity stationary at the vacuum
phase-space spread <|alpha|^2> = 1/2, so occupations follow from the
symmetric-ordering correction n_i = <|alpha_i|^2> - 1/2.

Reproducibility: trajectory ``i`` draws from its own counter-based stream
keyed by (master_seed, i) — first the two initial fields (4 normals), then
4 normals per step — so every trajectory is a pure function of
(master_seed, i, config, params), independent of worker scheduling. The
ensemble reduction sums fixed blocks of REDUCTION_BLOCK trajectories in
index order, which makes the statistics bit-identical for any worker
count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import DimerParams
from .meanfield import GPParams

REDUCTION_BLOCK = 1024
CHUNK_STEPS = 256


@dataclass(frozen=True)
class SdeConfig:
    """Numerical knobs of one stochastic run (time unit: 1/kappa_1)."""

    t_final: float
    dt: float = 1e-3
    n_traj: int = 1
    master_seed: int = 0
    noise_enabled: bool = True
    sample_stride: int = 50
    snapshot_times: tuple[float, ...] = ()
    store_fields: bool = False
    blow_up_threshold: float = 1e6

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def sample_times(self) -> np.ndarray:
        n = self.n_steps // self.sample_stride + 1
        return np.arange(n) * (self.sample_stride * self.dt)

    def seed_record(self) -> dict:
        return {
            "generator": "philox-4x64",
            "key": "(master_seed, trajectory_index)",
            "master_seed": int(self.master_seed),
            "stream_layout": "4 normals for the initial fields, then 4 per step",
        }


@dataclass(frozen=True)
class TrajectorySamples:
    """Sampled fields of a single trajectory."""

    times: np.ndarray
    alpha_1: np.ndarray
    alpha_2: np.ndarray
    excluded: bool
    seed_record: dict


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Reduced statistics (and optional raw fields) of a stochastic run."""

    times: np.ndarray
    mean_abs1_sq: np.ndarray
    mean_abs2_sq: np.ndarray
    var_abs1_sq: np.ndarray
    var_abs2_sq: np.ndarray
    cov_abs_sq: np.ndarray
    mean_alpha_1: np.ndarray
    mean_alpha_2: np.ndarray
    n_traj: int
    n_excluded: int
    seed_record: dict
    snapshots: dict = field(default_factory=dict)
    fields_1: np.ndarray | None = None
    fields_2: np.ndarray | None = None

    @property
    def n_alive(self) -> int:
        return self.n_traj - self.n_excluded


@dataclass(frozen=True)
class ObservableSeries:
    """Occupation observables with symmetric-ordering corrections applied."""

    times: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    z: np.ndarray
    se_n1: np.ndarray
    se_n2: np.ndarray
    se_z: np.ndarray


def _drift_constants(params: DimerParams):
    # -i[-(delta + i kappa/2) - u] = i(delta + u) - kappa/2 on the linear term
    m1 = 1j * (params.delta_1 + params.u_1) - 0.5 * params.kappa_1
    m2 = 1j * (params.delta_2 + params.u_2) - 0.5 * params.kappa_2
    return (m1, m2, -1j * params.u_1, -1j * params.u_2,
            1j * params.j, -1j * params.f)


def deterministic_gp_params(params: DimerParams) -> GPParams:
    """Mean-field parameters reproducing the noise-free drift.

    The phase-space nonlinearity u(|alpha|^2 - 1) acts like a mean-field
    dimer with detunings shifted by +u_i on unscaled fields.
    """
    return GPParams(delta_1=params.delta_1 + params.u_1,
                    delta_2=params.delta_2 + params.u_2,
                    u_1=params.u_1, u_2=params.u_2,
                    kappa_1=params.kappa_1, kappa_2=params.kappa_2,
                    j=params.j, f_eff=params.f)


def _block_generators(master_seed: int, indices: np.ndarray):
    key_hi = int(master_seed) % (1 << 64)
    return [np.random.Generator(np.random.Philox(key=np.array(
        [key_hi, int(i)], dtype=np.uint64))) for i in indices]


def _integrate_block(params: DimerParams, config: SdeConfig,
                     indices: np.ndarray, snapshot_steps: dict,
                     weights: np.ndarray | None = None) -> dict:
    """Integrate one reduction block; returns partial sums in index order.

    ``weights`` (0/1 per trajectory) silences trajectories excluded by an
    earlier pass so that their contribution vanishes from t = 0 on.
    """
    m1, m2, g1, g2, jc, fc = _drift_constants(params)
    dt = config.dt
    amp1 = 0.5 * math.sqrt(params.kappa_1 * dt)
    amp2 = 0.5 * math.sqrt(params.kappa_2 * dt)
    thr_sq = config.blow_up_threshold ** 2

    b = len(indices)
    gens = _block_generators(config.master_seed, indices)
    a1 = np.zeros(b, dtype=complex)
    a2 = np.zeros(b, dtype=complex)
    if config.noise_enabled:
        init = np.empty((b, 4))
        for row, gen in enumerate(gens):
            gen.standard_normal(size=4, out=init[row])
        a1 = 0.5 * (init[:, 0] + 1j * init[:, 1])
        a2 = 0.5 * (init[:, 2] + 1j * init[:, 3])

    n_steps = config.n_steps
    stride = config.sample_stride
    n_samples = n_steps // stride + 1
    included = np.ones(b, dtype=bool) if weights is None else weights > 0
    alive = included.copy()
    first_bad = np.full(b, -1, dtype=int)

    sums = {
        "x1": np.zeros(n_samples), "x2": np.zeros(n_samples),
        "x1_sq": np.zeros(n_samples), "x2_sq": np.zeros(n_samples),
        "x1_x2": np.zeros(n_samples),
        "a1": np.zeros(n_samples, dtype=complex),
        "a2": np.zeros(n_samples, dtype=complex),
    }
    snapshots = {}
    fields_1 = np.empty((b, n_samples), dtype=complex) if config.store_fields else None
    fields_2 = np.empty((b, n_samples), dtype=complex) if config.store_fields else None

    def record(sample_idx):
        x1 = np.where(alive, a1.real ** 2 + a1.imag ** 2, 0.0)
        x2 = np.where(alive, a2.real ** 2 + a2.imag ** 2, 0.0)
        sums["x1"][sample_idx] = np.sum(x1)
        sums["x2"][sample_idx] = np.sum(x2)
        sums["x1_sq"][sample_idx] = np.sum(x1 * x1)
        sums["x2_sq"][sample_idx] = np.sum(x2 * x2)
        sums["x1_x2"][sample_idx] = np.sum(x1 * x2)
        sums["a1"][sample_idx] = np.sum(np.where(alive, a1, 0.0))
        sums["a2"][sample_idx] = np.sum(np.where(alive, a2, 0.0))
        if fields_1 is not None:
            fields_1[:, sample_idx] = a1
            fields_2[:, sample_idx] = a2

    record(0)
    if 0 in snapshot_steps:
        snapshots[snapshot_steps[0]] = (a1.copy(), a2.copy())

    noise = np.empty((b, CHUNK_STEPS, 4)) if config.noise_enabled else None
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while step < n_steps:
            chunk = min(CHUNK_STEPS, n_steps - step)
            if config.noise_enabled:
                for row, gen in enumerate(gens):
                    gen.standard_normal(size=(chunk, 4), out=noise[row, :chunk])
            for k in range(chunk):
                x1 = a1.real ** 2 + a1.imag ** 2
                x2 = a2.real ** 2 + a2.imag ** 2
                d1 = (m1 + g1 * x1) * a1 + jc * a2 + fc
                d2 = (m2 + g2 * x2) * a2 + jc * a1
                a1 = a1 + dt * d1
                a2 = a2 + dt * d2
                if config.noise_enabled:
                    a1 = a1 + amp1 * (noise[:, k, 0] + 1j * noise[:, k, 1])
                    a2 = a2 + amp2 * (noise[:, k, 2] + 1j * noise[:, k, 3])
                step += 1
                if step % stride == 0:
                    record(step // stride)
                if step in snapshot_steps:
                    snapshots[snapshot_steps[step]] = (a1.copy(), a2.copy())
            # Blow-up scan once per chunk; offenders stop contributing and
            # are reported so the caller can rerun with them silenced from
            # t = 0 (only that rerun's statistics are kept).
            x1 = a1.real ** 2 + a1.imag ** 2
            x2 = a2.real ** 2 + a2.imag ** 2
            bad = alive & (~np.isfinite(x1) | ~np.isfinite(x2)
                           | (x1 > thr_sq) | (x2 > thr_sq))
            if np.any(bad):
                first_bad[bad & (first_bad < 0)] = step
                alive &= ~bad
                a1 = np.where(bad, 0.0, a1)
                a2 = np.where(bad, 0.0, a2)

    return {"sums": sums, "alive": alive, "first_bad": first_bad,
            "snapshots": snapshots, "fields_1": fields_1, "fields_2": fields_2}


def _block_task(args):
    return _integrate_block(*args)


def run_ensemble(params: DimerParams, config: SdeConfig,
                 workers: int | None = None) -> TrajectoryEnsemble:
    """Integrate ``config.n_traj`` trajectories and reduce their statistics.

    Blown-up trajectories are excluded from every statistic (a second,
    reweighted pass drops their pre-blow-up contribution too) and counted
    in a warning.
    """
    n = config.n_traj
    blocks = [np.arange(lo, min(lo + REDUCTION_BLOCK, n))
              for lo in range(0, n, REDUCTION_BLOCK)]
    snapshot_steps = {}
    for t_snap in config.snapshot_times:
        step = int(round(t_snap / config.dt))
        if not 0 <= step <= config.n_steps:
            raise ValueError(f"snapshot time {t_snap} outside the run")
        snapshot_steps[step] = float(t_snap)

    def run_blocks(weight_list):
        tasks = [(params, config, block, snapshot_steps, weight_list[i])
                 for i, block in enumerate(blocks)]
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(_block_task, tasks))
        return [_block_task(t) for t in tasks]

    results = run_blocks([None] * len(blocks))
    excluded_total = sum(int(np.sum(~r["alive"])) for r in results)
    if excluded_total:
        rate = excluded_total / n
        warnings.warn(f"excluded {excluded_total}/{n} blown-up trajectories "
                      f"({rate:.2%}); statistics use the survivors only",
                      RuntimeWarning)
        results = run_blocks([r["alive"] for r in results])

    n_alive = sum(int(np.sum(r["alive"])) for r in results)
    if n_alive == 0:
        raise RuntimeError("every trajectory blew up; check parameters and dt")

    keys = ("x1", "x2", "x1_sq", "x2_sq", "x1_x2", "a1", "a2")
    totals = {k: np.sum(np.stack([r["sums"][k] for r in results]), axis=0)
              for k in keys}
    mean_x1 = totals["x1"] / n_alive
    mean_x2 = totals["x2"] / n_alive
    ddof = max(n_alive - 1, 1)
    var_x1 = np.maximum(totals["x1_sq"] - n_alive * mean_x1 ** 2, 0.0) / ddof
    var_x2 = np.maximum(totals["x2_sq"] - n_alive * mean_x2 ** 2, 0.0) / ddof
    cov = (totals["x1_x2"] - n_alive * mean_x1 * mean_x2) / ddof

    snapshots = {}
    for t_snap in snapshot_steps.values():
        parts_1, parts_2 = [], []
        for r in results:
            s1, s2 = r["snapshots"][t_snap]
            parts_1.append(s1[r["alive"]])
            parts_2.append(s2[r["alive"]])
        snapshots[t_snap] = (np.concatenate(parts_1), np.concatenate(parts_2))

    fields_1 = fields_2 = None
    if config.store_fields:
        fields_1 = np.concatenate([r["fields_1"] for r in results], axis=0)
        fields_2 = np.concatenate([r["fields_2"] for r in results], axis=0)

    return TrajectoryEnsemble(
        times=config.sample_times,
        mean_abs1_sq=mean_x1, mean_abs2_sq=mean_x2,
        var_abs1_sq=var_x1, var_abs2_sq=var_x2, cov_abs_sq=cov,
        mean_alpha_1=totals["a1"] / n_alive,
        mean_alpha_2=totals["a2"] / n_alive,
        n_traj=n, n_excluded=n - n_alive,
        seed_record=config.seed_record(),
        snapshots=snapshots, fields_1=fields_1, fields_2=fields_2,
    )


def integrate_trajectory(params: DimerParams, config: SdeConfig,
                         trajectory_index: int) -> TrajectorySamples:
    """Sampled fields of one trajectory (bit-identical to its ensemble row)."""
    if not 0 <= trajectory_index:
        raise ValueError("trajectory_index must be >= 0")
    cfg = SdeConfig(t_final=config.t_final, dt=config.dt, n_traj=1,
                    master_seed=config.master_seed,
                    noise_enabled=config.noise_enabled,
                    sample_stride=config.sample_stride,
                    snapshot_times=(), store_fields=True,
                    blow_up_threshold=config.blow_up_threshold)
    out = _integrate_block(params, cfg, np.array([trajectory_index]), {})
    return TrajectorySamples(
        times=cfg.sample_times,
        alpha_1=out["fields_1"][0], alpha_2=out["fields_2"][0],
        excluded=not bool(out["alive"][0]),
        seed_record=cfg.seed_record(),
    )


def ensemble_observables(ensemble: TrajectoryEnsemble) -> ObservableSeries:
    """Occupations and population difference with ordering corrections.

    n_i = <|alpha_i|^2> - 1/2; the corrections cancel in z = n_1 - n_2.
    """
    n_alive = ensemble.n_alive
    se_scale = 1.0 / math.sqrt(max(n_alive, 1))
    var_z = np.maximum(
        ensemble.var_abs1_sq + ensemble.var_abs2_sq - 2.0 * ensemble.cov_abs_sq,
        0.0)
    return ObservableSeries(
        times=ensemble.times,
        n1=ensemble.mean_abs1_sq - 0.5,
        n2=ensemble.mean_abs2_sq - 0.5,
        z=ensemble.mean_abs1_sq - ensemble.mean_abs2_sq,
        se_n1=np.sqrt(ensemble.var_abs1_sq) * se_scale,
        se_n2=np.sqrt(ensemble.var_abs2_sq) * se_scale,
        se_z=np.sqrt(var_z) * se_scale,
    )


@dataclass(frozen=True)
class PhaseSpaceHistogram:
    """2D field histograms of both modes at one snapshot time."""

    time: float
    edges_re: np.ndarray
    edges_im: np.ndarray
    counts_1: np.ndarray
    counts_2: np.ndarray
    n_counted: int


def phase_space_histogram(ensemble: TrajectoryEnsemble, time: float,
                          bins: int = 61,
                          extent: float | None = None) -> PhaseSpaceHistogram:
    """Histogram the snapshot fields over the (Re, Im) plane.

    The snapshot closest to ``time`` is used; both modes share the recorded
    bin edges so panels are directly comparable.
    """
    if not ensemble.snapshots:
        raise ValueError("ensemble was run without snapshot_times")
    t_avail = np.array(sorted(ensemble.snapshots))
    t_used = float(t_avail[np.argmin(np.abs(t_avail - time))])
    a1, a2 = ensemble.snapshots[t_used]
    if a1.size == 0:
        raise ValueError("no surviving trajectories to histogram")
    if extent is None:
        extent = float(np.max(np.abs(np.concatenate(
            [a1.real, a1.imag, a2.real, a2.imag])))) * 1.05
    edges = np.linspace(-extent, extent, bins + 1)
    counts_1, _, _ = np.histogram2d(a1.real, a1.imag, bins=(edges, edges))
    counts_2, _, _ = np.histogram2d(a2.real, a2.imag, bins=(edges, edges))
    return PhaseSpaceHistogram(time=t_used, edges_re=edges, edges_im=edges,
                               counts_1=counts_1, counts_2=counts_2,
                               n_counted=int(a1.size))
