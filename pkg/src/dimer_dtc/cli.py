"""Batch runner: validates a JSON run configuration, executes one experiment,
and writes CSV tables plus a provenance manifest.

Output contract (consumed by the figure scripts, documented in README.md):
every experiment writes ``<experiment>.csv`` with a header row and
17-significant-digit floats, fit-like results go to ``<experiment>_fit.json``,
and ``manifest.json`` lists every output with its SHA-256 hash.

Exit codes: 0 success, 2 validation failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__, fitting, meanfield, observables, spectrum, twa
from .errors import ConfigError, DimerDtcError
from .meanfield import GPParams, GPState
from .model import DimerParams, ScalingPoint, build_liouvillian
from .spectrum import leading_eigenvalues, liouvillian_gap, detect_band_structure
from .steady_state import solve_steady_state
from .twa import SdeConfig

WORKERS_ENV_VAR = "DIMER_DTC_WORKERS"

EXPERIMENTS = ("phase-diagram", "gp-evolve", "steady-state", "spectrum",
               "twa", "gap-scaling", "observables", "rho-av", "sweep")


# --------------------------------------------------------------------------
# configuration parsing and validation

def _reject_unknown(block: dict, allowed: set, where: str):
    for key in block:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suggestion = f'; did you mean "{hint[0]}"?' if hint else ""
            raise ConfigError(f'unknown key "{key}" in {where}{suggestion}')


def _require(block: dict, keys, where: str):
    for key in keys:
        if key not in block:
            raise ConfigError(f'missing key "{key}" in {where}')


def _axis_values(spec, name: str) -> list[float]:
    """An axis is either [min, max, n] or an explicit list of values."""
    if (isinstance(spec, list) and len(spec) == 3
            and isinstance(spec[2], int) and spec[2] >= 2):
        lo, hi, n = spec
        return [float(v) for v in np.linspace(lo, hi, n)]
    if isinstance(spec, list) and len(spec) >= 2:
        return [float(v) for v in spec]
    raise ConfigError(f'axis "{name}" must be [min, max, n] or a list of '
                      ">= 2 values")


@dataclass
class RunConfig:
    """Validated run configuration."""

    experiment: str
    params: dict
    numerics: dict
    seed: int = 0
    workers: int | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        _reject_unknown(raw, {"experiment", "params", "numerics", "seed",
                              "workers"}, "config root")
        _require(raw, ["experiment"], "config root")
        experiment = raw["experiment"]
        if experiment not in EXPERIMENTS:
            hint = difflib.get_close_matches(experiment, EXPERIMENTS, n=1)
            suggestion = f'; did you mean "{hint[0]}"?' if hint else ""
            raise ConfigError(f'unknown experiment "{experiment}"{suggestion}')
        cfg = cls(experiment=experiment,
                  params=dict(raw.get("params", {})),
                  numerics=dict(raw.get("numerics", {})),
                  seed=int(raw.get("seed", 0)),
                  workers=raw.get("workers"))
        _VALIDATORS[experiment](cfg)
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config parse error at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from exc
        return cls.from_dict(raw)


def _validate_phase_diagram(cfg: RunConfig):
    _reject_unknown(cfg.params, {"delta", "j", "f_tilde", "delta_2", "u_2",
                                 "kappa_2"}, "params")
    _require(cfg.params, ["delta", "j", "f_tilde"], "params")
    _reject_unknown(cfg.numerics, set(), "numerics")
    _axis_values(cfg.params["j"], "j")
    _axis_values(cfg.params["f_tilde"], "f_tilde")


def _validate_point_params(cfg: RunConfig):
    _reject_unknown(cfg.params, {"delta", "j", "f_tilde", "u"}, "params")
    _require(cfg.params, ["delta", "j", "f_tilde", "u"], "params")


def _validate_gp_evolve(cfg: RunConfig):
    _reject_unknown(cfg.params, {"delta", "j", "f_tilde"}, "params")
    _require(cfg.params, ["delta", "j", "f_tilde"], "params")
    _reject_unknown(cfg.numerics, {"t_final", "dt", "sample_stride",
                                   "transient_cut"}, "numerics")


def _validate_steady_state(cfg: RunConfig):
    _validate_point_params(cfg)
    _reject_unknown(cfg.numerics, {"n_max"}, "numerics")


def _validate_spectrum(cfg: RunConfig):
    _validate_point_params(cfg)
    _reject_unknown(cfg.numerics, {"n_max", "k", "band_re_tolerance"},
                    "numerics")


def _validate_twa(cfg: RunConfig):
    _validate_point_params(cfg)
    _reject_unknown(cfg.numerics, {"t_final", "dt", "n_traj", "sample_stride",
                                   "t_fit_min", "max_components",
                                   "snapshot_times"}, "numerics")
    _require(cfg.numerics, ["t_final", "n_traj"], "numerics")


def _validate_gap_scaling(cfg: RunConfig):
    _reject_unknown(cfg.params, {"delta", "j", "f_tilde", "u_values"}, "params")
    _require(cfg.params, ["delta", "j", "f_tilde", "u_values"], "params")
    _reject_unknown(cfg.numerics, {"t_final", "dt", "n_traj", "sample_stride",
                                   "t_fit_min", "max_components"}, "numerics")
    _require(cfg.numerics, ["t_final", "n_traj"], "numerics")


def _validate_rho_av(cfg: RunConfig):
    _validate_point_params(cfg)
    _reject_unknown(cfg.numerics, {"t_final", "dt", "transient_cut", "samples",
                                   "n_max"}, "numerics")


def _validate_sweep(cfg: RunConfig):
    _reject_unknown(cfg.params, {"delta", "j", "f_tilde", "u", "axis"},
                    "params")
    _require(cfg.params, ["delta", "j", "axis"], "params")
    axis = cfg.params["axis"]
    if not isinstance(axis, dict):
        raise ConfigError('"axis" must be an object {"name": ..., "values": ...}')
    _reject_unknown(axis, {"name", "values"}, "params.axis")
    _require(axis, ["name", "values"], "params.axis")
    if axis["name"] not in ("f_tilde", "u"):
        raise ConfigError('axis name must be "f_tilde" or "u"')
    values = _axis_values(axis["values"], axis["name"])
    if not all(np.isfinite(values)):
        raise ConfigError("axis values must be finite")
    fixed = "u" if axis["name"] == "f_tilde" else "f_tilde"
    _require(cfg.params, [fixed], "params")
    _reject_unknown(cfg.numerics, {"n_max", "k", "observables",
                                   "band_re_tolerance"}, "numerics")


_VALIDATORS = {
    "phase-diagram": _validate_phase_diagram,
    "gp-evolve": _validate_gp_evolve,
    "steady-state": _validate_steady_state,
    "spectrum": _validate_spectrum,
    "twa": _validate_twa,
    "gap-scaling": _validate_gap_scaling,
    "observables": _validate_steady_state,
    "rho-av": _validate_rho_av,
    "sweep": _validate_sweep,
}


# --------------------------------------------------------------------------
# output helpers

def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance of one run, written next to the outputs."""

    config: dict
    artifact_version: str = __version__
    started_utc: str = ""
    elapsed_seconds: float = 0.0
    warnings: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def add_output(self, path: str):
        self.outputs.append({
            "path": os.path.basename(path),
            "sha256": _sha256(path),
            "bytes": os.path.getsize(path),
        })

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "artifact_version": self.artifact_version,
            "started_utc": self.started_utc,
            "elapsed_seconds": self.elapsed_seconds,
            "warnings": self.warnings,
            "outputs": self.outputs,
        }


# --------------------------------------------------------------------------
# experiment drivers

def _symmetric_point(params: dict) -> DimerParams:
    point = ScalingPoint(u=float(params["u"]), f_tilde=float(params["f_tilde"]))
    return point.dimer_params(delta=float(params["delta"]), j=float(params["j"]))


def _auto_cutoffs(params: dict, numerics: dict) -> tuple[int, int]:
    if "n_max" in numerics:
        n_max = numerics["n_max"]
        return (int(n_max[0]), int(n_max[1]))
    # Size the truncation from the mean-field cycle amplitudes.
    u = float(params["u"])
    gp = GPParams.symmetric_rescaled(float(params["delta"]), float(params["j"]),
                                     float(params["f_tilde"]))
    traj = meanfield.integrate_gp(GPState(0, 0), gp, t_final=300.0)
    scale = 1.0 / np.sqrt(u)
    a1 = np.max(np.abs(traj.alpha_1[traj.times > 100.0])) * scale
    a2 = np.max(np.abs(traj.alpha_2[traj.times > 100.0])) * scale
    return (observables.suggested_cutoff(a1), observables.suggested_cutoff(a2))


def _run_phase_diagram(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    p = cfg.params
    overrides = {}
    for src, dst in (("delta_2", "delta_2"), ("u_2", "u_2"),
                     ("kappa_2", "kappa_2")):
        if src in p:
            overrides[dst] = float(p[src])
    cells = meanfield.scan_phase_diagram(
        _axis_values(p["j"], "j"), _axis_values(p["f_tilde"], "f_tilde"),
        delta=float(p["delta"]), overrides=overrides or None,
        workers=cfg.workers)
    rows = [[c.j, c.f_tilde, c.n_solutions, c.label,
             ";".join(s.value for s in c.stabilities), c.error or ""]
            for c in cells]
    path = os.path.join(out_dir, "phase-diagram.csv")
    write_csv(path, ["j", "f_tilde", "n_solutions", "region", "stabilities",
                     "error"], rows)
    return [path]


def _run_gp_evolve(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    p, n = cfg.params, cfg.numerics
    gp = GPParams.symmetric_rescaled(float(p["delta"]), float(p["j"]),
                                     float(p["f_tilde"]))
    t_final = float(n.get("t_final", 1000.0))
    traj = meanfield.integrate_gp(GPState(0, 0), gp, t_final,
                                  dt=float(n.get("dt", 1e-3)),
                                  sample_stride=int(n.get("sample_stride", 10)))
    rows = [[t, a1.real, a1.imag, a2.real, a2.imag]
            for t, a1, a2 in zip(traj.times, traj.alpha_1, traj.alpha_2)]
    path = os.path.join(out_dir, "gp-evolve.csv")
    write_csv(path, ["t", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2"],
              rows)
    cycle = meanfield.limit_cycle_period(
        traj, transient_cut=float(n.get("transient_cut", 200.0)))
    fit_path = os.path.join(out_dir, "gp-evolve_fit.json")
    if cycle is None:
        write_json(fit_path, {"cycle_found": False})
    else:
        write_json(fit_path, {
            "cycle_found": True, "period": cycle.period,
            "crossing_spread": cycle.crossing_spread,
            "omega_0": 2.0 * np.pi / cycle.period,
        })
    return [path, fit_path]


def _run_steady_state(cfg: RunConfig, out_dir: str, manifest: RunManifest,
                      experiment: str = "steady-state"):
    params = _symmetric_point(cfg.params)
    cutoffs = _auto_cutoffs(cfg.params, cfg.numerics)
    liouv = build_liouvillian(params, cutoffs)
    rho = solve_steady_state(liouv)
    rep = observables.report(rho, u=float(cfg.params["u"]))
    path = os.path.join(out_dir, f"{experiment}.csv")
    write_csv(path,
              ["f_tilde", "u", "n1", "n2", "z", "e_n", "s", "u_n1", "u_n2",
               "n_max1", "n_max2", "residual"],
              [[float(cfg.params["f_tilde"]), float(cfg.params["u"]),
                rep.n1, rep.n2, rep.z, rep.e_n, rep.s, rep.u_n1, rep.u_n2,
                cutoffs[0], cutoffs[1], rho.meta.get("residual", 0.0)]])
    return [path]


def _run_spectrum(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    params = _symmetric_point(cfg.params)
    cutoffs = _auto_cutoffs(cfg.params, cfg.numerics)
    liouv = build_liouvillian(params, cutoffs)
    spec = leading_eigenvalues(liouv, k=int(cfg.numerics.get("k", 30)))
    gap = liouvillian_gap(spec)
    band = detect_band_structure(
        spec, re_tolerance=float(cfg.numerics.get("band_re_tolerance", 0.35)))
    rows = [[lam.real, lam.imag] for lam in spec.eigenvalues]
    path = os.path.join(out_dir, "spectrum.csv")
    write_csv(path, ["re_lambda", "im_lambda"], rows)
    fit_path = os.path.join(out_dir, "spectrum_fit.json")
    write_json(fit_path, {
        "gap": gap,
        "band_detected": band is not None,
        "omega_0": None if band is None else band.omega_0,
        "multiples": None if band is None else list(band.multiples),
        "band_residual": None if band is None else band.residual,
        "method": spec.method, "n_max": list(cutoffs),
    })
    return [path, fit_path]


def _run_twa(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    params = _symmetric_point(cfg.params)
    n = cfg.numerics
    config = SdeConfig(
        t_final=float(n["t_final"]), dt=float(n.get("dt", 1e-3)),
        n_traj=int(n["n_traj"]), master_seed=cfg.seed,
        sample_stride=int(n.get("sample_stride", 50)),
        snapshot_times=tuple(float(t) for t in n.get("snapshot_times", ())))
    ensemble = twa.run_ensemble(params, config, workers=cfg.workers)
    series = twa.ensemble_observables(ensemble)
    rows = [[t, n1, n2, z, se]
            for t, n1, n2, z, se in zip(series.times, series.n1, series.n2,
                                        series.z, series.se_z)]
    path = os.path.join(out_dir, "twa.csv")
    write_csv(path, ["t", "n1", "n2", "z", "se_z"], rows)
    fit = fitting.fit_damped_oscillations(
        series.times, series.z,
        t_min=float(n.get("t_fit_min", 0.2 * config.t_final)),
        max_components=int(n.get("max_components", 3)))
    fit_path = os.path.join(out_dir, "twa_fit.json")
    write_json(fit_path, {
        "oscillating": fit.oscillating, "lambda_gap": fit.lambda_gap,
        "frequencies": list(fit.frequencies),
        "amplitudes": list(fit.amplitudes),
        "phases": list(fit.phases), "offset": fit.offset,
        "fundamental": fit.fundamental,
        "multiples": None if fit.multiples is None else list(fit.multiples),
        "harmonic": fit.harmonic, "residual": fit.residual,
        "method": fit.method,
        "excluded_trajectories": ensemble.n_excluded,
    })
    return [path, fit_path]


def _run_gap_scaling(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    p, n = cfg.params, cfg.numerics
    config = SdeConfig(
        t_final=float(n["t_final"]), dt=float(n.get("dt", 1e-3)),
        n_traj=int(n["n_traj"]), master_seed=cfg.seed,
        sample_stride=int(n.get("sample_stride", 50)))
    result = fitting.gap_scaling(
        delta=float(p["delta"]), j=float(p["j"]), f_tilde=float(p["f_tilde"]),
        u_values=[float(u) for u in p["u_values"]], config=config,
        t_fit_min=float(n.get("t_fit_min", 0.2 * config.t_final)),
        max_components=int(n.get("max_components", 3)), workers=cfg.workers)
    rows = [[u, lam, fit.fundamental]
            for u, lam, fit in zip(result.u_values, result.lambdas, result.fits)]
    path = os.path.join(out_dir, "gap-scaling.csv")
    write_csv(path, ["u", "lambda", "omega_0"], rows)
    fit_path = os.path.join(out_dir, "gap-scaling_fit.json")
    write_json(fit_path, {
        "eta": result.eta, "eta_stderr": result.eta_stderr,
        "u_values": list(result.u_values), "lambdas": list(result.lambdas),
        "skipped_u": list(result.skipped),
    })
    return [path, fit_path]


def _run_rho_av(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    p, n = cfg.params, cfg.numerics
    u = float(p["u"])
    gp = GPParams.symmetric_rescaled(float(p["delta"]), float(p["j"]),
                                     float(p["f_tilde"]))
    traj = meanfield.integrate_gp(GPState(0, 0), gp,
                                  t_final=float(n.get("t_final", 500.0)),
                                  dt=float(n.get("dt", 1e-3)))
    cycle = meanfield.limit_cycle_period(
        traj, transient_cut=float(n.get("transient_cut", 200.0)))
    path = os.path.join(out_dir, "rho-av.csv")
    if cycle is None:
        write_csv(path, ["error"], [["no limit cycle at this point"]])
        return [path]
    unscaled = cycle.scaled(1.0 / np.sqrt(u))
    cutoffs = None
    if "n_max" in n:
        cutoffs = (int(n["n_max"][0]), int(n["n_max"][1]))
    rho_av = observables.time_averaged_rho(unscaled, cutoffs=cutoffs,
                                           samples=int(n.get("samples", 64)))
    rep = observables.report(rho_av, u=u)
    write_csv(path,
              ["f_tilde", "u", "period", "n1_av", "n2_av", "e_n_av", "s_av",
               "u_n1_av", "u_n2_av"],
              [[float(p["f_tilde"]), u, cycle.period, rep.n1, rep.n2,
                rep.e_n, rep.s, rep.u_n1, rep.u_n2]])
    return [path]


_SWEEP_COLUMNS = ("n1", "n2", "u_n1", "u_n2", "e_n", "s", "lambda", "omega_0")


def _run_sweep(cfg: RunConfig, out_dir: str, manifest: RunManifest):
    p, n = cfg.params, cfg.numerics
    axis = p["axis"]
    values = _axis_values(axis["values"], axis["name"])
    wanted = tuple(n.get("observables", ["n1", "n2", "u_n1", "u_n2", "e_n", "s"]))
    for name in wanted:
        if name not in _SWEEP_COLUMNS:
            raise ConfigError(f'unknown observable "{name}"')
    need_spectrum = "lambda" in wanted or "omega_0" in wanted
    rows = []
    for value in values:
        point = dict(p)
        point[axis["name"]] = value
        row = [value]
        try:
            params = _symmetric_point(point)
            cutoffs = _auto_cutoffs(point, n)
            liouv = build_liouvillian(params, cutoffs)
            rho = solve_steady_state(liouv)
            rep = observables.report(rho, u=float(point["u"]))
            gap = omega_0 = None
            if need_spectrum:
                spec = leading_eigenvalues(liouv, k=int(n.get("k", 30)))
                gap = liouvillian_gap(spec)
                band = detect_band_structure(
                    spec,
                    re_tolerance=float(n.get("band_re_tolerance", 0.35)))
                omega_0 = None if band is None else band.omega_0
            values_map = {"n1": rep.n1, "n2": rep.n2, "u_n1": rep.u_n1,
                          "u_n2": rep.u_n2, "e_n": rep.e_n, "s": rep.s,
                          "lambda": gap, "omega_0": omega_0}
            row.extend(values_map[name] for name in wanted)
            row.append("")
        except Exception as exc:
            row.extend([None] * len(wanted))
            row.append(str(exc))
        rows.append(row)
    path = os.path.join(out_dir, "sweep.csv")
    write_csv(path, [axis["name"], *wanted, "error"], rows)
    return [path]


_DRIVERS = {
    "phase-diagram": _run_phase_diagram,
    "gp-evolve": _run_gp_evolve,
    "steady-state": _run_steady_state,
    "spectrum": _run_spectrum,
    "twa": _run_twa,
    "gap-scaling": _run_gap_scaling,
    "observables": lambda cfg, out, man: _run_steady_state(
        cfg, out, man, experiment="observables"),
    "rho-av": _run_rho_av,
    "sweep": _run_sweep,
}


# --------------------------------------------------------------------------
# entry point

def run(config_path: str, out_dir: str | None = None,
        workers: int | None = None, seed: int | None = None) -> int:
    """Execute one experiment; returns the process exit code."""
    try:
        cfg = RunConfig.from_file(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        cfg.workers = workers
    elif cfg.workers is None and os.environ.get(WORKERS_ENV_VAR):
        cfg.workers = int(os.environ[WORKERS_ENV_VAR])

    out_dir = out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(config={
        "experiment": cfg.experiment, "params": cfg.params,
        "numerics": cfg.numerics, "seed": cfg.seed,
    })
    manifest.started_utc = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    start = time.monotonic()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            outputs = _DRIVERS[cfg.experiment](cfg, out_dir, manifest)
        manifest.warnings.extend(str(w.message) for w in caught)
    except DimerDtcError as exc:
        _write_error_record(out_dir, cfg, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    manifest.elapsed_seconds = time.monotonic() - start
    for path in outputs:
        manifest.add_output(path)
    write_json(os.path.join(out_dir, "manifest.json"), manifest.to_dict())
    return 0


def _write_error_record(out_dir: str, cfg: RunConfig, exc: Exception):
    write_json(os.path.join(out_dir, "error.json"), {
        "experiment": cfg.experiment,
        "error_type": type(exc).__name__,
        "message": str(exc),
    })


def validate(config_path: str) -> int:
    try:
        RunConfig.from_file(config_path)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dimer-dtc",
        description="Batch experiments on the driven-dissipative Kerr dimer.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config", help="path to a JSON run configuration")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, out_dir=args.out, workers=args.workers,
                   seed=args.seed)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
