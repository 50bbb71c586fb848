"""Command-line entry point: ``simulate --config run.json [--mode m] [--out dir] [--jobs k]``.

A run reads a JSON configuration (see ``config_schema.json``), executes one
of the modes below and writes its outputs to a directory:

``jko``      minimizing-movement trajectory
``pde``      front-tracking reference trajectory
``compare``  two minimizing-movement runs and their distance over time
``certify``  one trajectory plus every applicable certificate
``sweep``    step-size refinement against the reference solver

Every run writes ``manifest.json``. Trajectory runs write ``trajectory.csv``
and ``densities/*.csv``; certificate-producing modes write
``certificate.json`` and ``certificate.csv``. The exit status is nonzero if
any certificate check fails.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path
from typing import Optional

import numpy as np
import jsonschema

from . import profiles
from .analysis import (
    CertificateReport,
    certify_trajectory,
    convergence_report,
    distance_series,
    reference_for,
    sup_error,
)
from .energy import energy_value, slope
from .errors import ConfigError, WGFError
from .jko import SolverConfig, Trajectory, run_trajectory
from .measures import GMeasure, ModelParams, first_moment, mass
from .reference_pde import PdeConfig, pde_solve
from .transport import w2

log = logging.getLogger("wgf")

MODES = ("jko", "pde", "compare", "certify", "sweep")


def load_schema() -> dict:
    return json.loads(resources.files("wgf").joinpath("config_schema.json").read_text())


@dataclass
class RunConfig:
    mode: str
    params: ModelParams
    initial: object
    T: float
    solver: SolverConfig
    pde: PdeConfig
    output_dir: Path
    emit_plots: bool = True
    initial_b: object = "equilibrium"
    h_list: tuple = (4e-3, 2e-3, 1e-3)
    certify_solver: str = "jko"
    contraction_tol: float = 1e-3
    density_stride: int = 1
    base_dir: Path = field(default_factory=Path.cwd)
    resolved: dict = field(default_factory=dict)


def _fill_defaults(raw: dict, schema: dict) -> dict:
    out = dict(raw)
    for key, prop in schema["properties"].items():
        if key not in out and "default" in prop:
            out[key] = copy.deepcopy(prop["default"])
    return out


def _format_error(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if not path and err.validator == "required":
        return f"missing key: {err.message}"
    if not path and err.validator == "additionalProperties":
        return f"unknown key: {err.message}"
    return f"invalid value for '{path}': {err.message}"


def validate_config(raw: dict, base_dir: Path | None = None, overrides: Optional[dict] = None) -> RunConfig:
    """Validate a configuration dictionary against the schema and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    schema = load_schema()
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_format_error(e) for e in errors))
    full = _fill_defaults(raw, schema)
    h_list = tuple(float(h) for h in full["h_list"])
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ConfigError("invalid value for 'h_list': must be strictly decreasing")
    base_dir = Path(base_dir or Path.cwd())
    for key in ("initial", "initial_b"):
        entry = full.get(key)
        if isinstance(entry, dict) and "csv" in entry:
            p = (base_dir / entry["csv"]).resolve()
            if not p.is_file():
                raise ConfigError(f"invalid value for '{key}.csv': file not found: {p}")
    try:
        cfg = RunConfig(
            mode=full["mode"],
            params=ModelParams(float(full["alpha"]), float(full["beta"])),
            initial=full["initial"],
            T=float(full["T"]),
            solver=SolverConfig(
                h=float(full["h"]),
                N=int(full["N"]),
                newton_tol=float(full["newton_tol"]),
                max_iters=int(full["max_iters"]),
                linesearch_shrink=float(full["linesearch_shrink"]),
            ),
            pde=PdeConfig(M=int(full["M"]), dt=float(full["dt"]), scheme=full["scheme"]),
            output_dir=Path(full["output_dir"]) if Path(full["output_dir"]).is_absolute() else base_dir / full["output_dir"],
            emit_plots=bool(full["emit_plots"]),
            initial_b=full.get("initial_b", "equilibrium"),
            h_list=h_list,
            certify_solver=full["certify_solver"],
            contraction_tol=float(full["contraction_tol"]),
            density_stride=int(full["density_stride"]),
            base_dir=base_dir,
            resolved=full,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    # parse initial data eagerly so malformed CSV files fail at load time
    build_initial(cfg.initial, cfg.params, cfg.solver.N, base_dir)
    if cfg.mode == "compare":
        build_initial(cfg.initial_b, cfg.params, cfg.solver.N, base_dir)
    return cfg


def parse_config(path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    return validate_config(raw, base_dir=path.resolve().parent, overrides=overrides)


def read_density_csv(path: Path, beta: float, N: int) -> GMeasure:
    """Density samples ``x, rho`` at strictly increasing ``x``; ``[L, R] = [x_0, x_last]``."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except ValueError as e:
        raise ConfigError(f"cannot parse initial CSV {path}: {e}") from e
    if data.dtype.names is None or not {"x", "rho"} <= set(data.dtype.names):
        raise ConfigError(f"initial CSV {path} needs columns 'x' and 'rho'")
    x = np.atleast_1d(data["x"]).astype(float)
    rho = np.atleast_1d(data["rho"]).astype(float)
    if x.size < 2 or not np.all(np.isfinite(x)) or not np.all(np.isfinite(rho)):
        raise ConfigError(f"initial CSV {path} needs at least two finite rows")
    if np.any(np.diff(x) <= 0):
        raise ConfigError(f"initial CSV {path}: x column must be strictly increasing")
    if np.any(rho < 0) or not np.any(rho > 0):
        raise ConfigError(f"initial CSV {path}: rho must be nonnegative with positive mass")
    return GMeasure.from_function(lambda t: np.interp(t, x, rho), x[0], x[-1], N, beta)


def build_initial(source, params: ModelParams, N: int, base_dir: Path) -> GMeasure:
    if isinstance(source, str):
        return profiles.PROFILES[source](params, N)
    source = dict(source)
    if "csv" in source:
        return read_density_csv(Path(base_dir) / source["csv"], params.beta, N)
    name = source.pop("profile")
    try:
        return profiles.PROFILES[name](params, N, **source)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid parameters for profile '{name}': {e}") from e


# --------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, path: Path):
    params = traj.params
    measures = traj.measures()
    steps = [0.0] + [w2(measures[k - 1], measures[k]) for k in range(1, len(measures))]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "L", "R", "E", "W2_step", "mass", "moment", "slope"])
        for k, m in enumerate(measures):
            w.writerow(
                [
                    _fmt(traj.times[k]),
                    _fmt(m.L),
                    _fmt(m.R),
                    _fmt(energy_value(m, params)),
                    _fmt(steps[k]),
                    _fmt(mass(traj.states[k])),
                    _fmt(first_moment(m)),
                    _fmt(slope(m, params)),
                ]
            )


def write_densities(traj: Trajectory, directory: Path, stride: int = 1):
    directory.mkdir(parents=True, exist_ok=True)
    last = len(traj.states) - 1
    for k, state in enumerate(traj.states):
        if k % stride and k != last:
            continue
        with open(directory / f"snapshot_{k:06d}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["x", "rho"])
            for x, r in zip(state.centers, state.rho):
                w.writerow([_fmt(x), _fmt(r)])


def write_certificate(report: CertificateReport, out: Path):
    (out / "certificate.json").write_text(report.to_json() + "\n")
    (out / "certificate.csv").write_text(report.to_csv())


def _plot(path: Path, series: list, xlabel: str, ylabel: str, logy: bool = False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wgf"
    fig, ax = plt.subplots(figsize=(6, 4))
    for x, y, label in series:
        ax.plot(x, y, label=label, marker="o" if len(x) < 10 else None)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_xscale("log")
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trajectory(traj: Trajectory, out: Path):
    E = [energy_value(m, traj.params) for m in traj.measures()]
    _plot(out / "energy.svg", [(traj.times, E, "E")], "t", "E")
    Ls = [m.L for m in traj.states]
    Rs = [m.R for m in traj.states]
    _plot(out / "boundaries.svg", [(traj.times, Ls, "L"), (traj.times, Rs, "R")], "t", "position")


def write_run(traj: Trajectory, out: Path, cfg: RunConfig) -> list:
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_densities(traj, out / "densities", cfg.density_stride)
    files = ["trajectory.csv", "densities/"]
    if cfg.emit_plots:
        plot_trajectory(traj, out)
        files += ["energy.svg", "boundaries.svg"]
    return files


def _package_version() -> str:
    try:
        return metadata.version("wgf")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(cfg: RunConfig, out: Path, files: list, status: int):
    manifest = {
        "artifact": "wgf",
        "version": _package_version(),
        "mode": cfg.mode,
        "config": cfg.resolved,
        "outputs": sorted(files),
        "status": status,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# modes


def _jko(cfg: RunConfig, mu0: GMeasure, solver: SolverConfig | None = None) -> Trajectory:
    return run_trajectory(mu0, cfg.T, cfg.params, solver or cfg.solver)


def _pde(cfg: RunConfig, mu0: GMeasure) -> Trajectory:
    return pde_solve(mu0, cfg.T, cfg.params, cfg.pde, snapshot_dt=cfg.solver.h)


def _mode_single(cfg: RunConfig, out: Path):
    mu0 = build_initial(cfg.initial, cfg.params, cfg.solver.N, cfg.base_dir)
    traj = _jko(cfg, mu0) if cfg.mode == "jko" else _pde(cfg, mu0)
    return write_run(traj, out, cfg), None


def _mode_certify(cfg: RunConfig, out: Path):
    mu0 = build_initial(cfg.initial, cfg.params, cfg.solver.N, cfg.base_dir)
    traj = _jko(cfg, mu0) if cfg.certify_solver == "jko" else _pde(cfg, mu0)
    files = write_run(traj, out, cfg)
    report = certify_trajectory(traj, cfg.params)
    write_certificate(report, out)
    return files + ["certificate.json", "certificate.csv"], report


def _mode_compare(cfg: RunConfig, out: Path):
    mu_a = build_initial(cfg.initial, cfg.params, cfg.solver.N, cfg.base_dir)
    mu_b = build_initial(cfg.initial_b, cfg.params, cfg.solver.N, cfg.base_dir)
    ta, tb = _jko(cfg, mu_a), _jko(cfg, mu_b)
    files = [f"A/{f}" for f in write_run(ta, out / "A", cfg)]
    files += [f"B/{f}" for f in write_run(tb, out / "B", cfg)]
    d = distance_series(ta, tb)
    with open(out / "distance.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "W2_AB"])
        for t, v in zip(ta.times, d):
            w.writerow([_fmt(t), _fmt(v)])
    files.append("distance.csv")
    report = CertificateReport()
    inc = float(np.max(np.diff(d))) if d.size > 1 else 0.0
    report.add("contraction", inc, 0.0, cfg.contraction_tol, "max_k W2(A,B)(t_{k+1}) - W2(A,B)(t_k) <= tol")
    for name, traj in (("A", ta), ("B", tb)):
        sub = certify_trajectory(traj, cfg.params)
        for c in sub.checks:
            c.name = f"{name}.{c.name}"
        report.extend(sub)
    write_certificate(report, out)
    files += ["certificate.json", "certificate.csv"]
    if cfg.emit_plots:
        _plot(out / "distance.svg", [(ta.times, d, "W2(A,B)")], "t", "W2(A,B)")
        files.append("distance.svg")
    return files, report


def _sweep_job(args):
    cfg, mu0, h, out = args
    solver = SolverConfig(h=h, N=cfg.solver.N, newton_tol=cfg.solver.newton_tol, max_iters=cfg.solver.max_iters,
                          linesearch_shrink=cfg.solver.linesearch_shrink)
    traj = run_trajectory(mu0, cfg.T, cfg.params, solver, track_el=False)
    write_run(traj, out, cfg)
    return traj


def _mode_sweep(cfg: RunConfig, out: Path, jobs: int):
    mu0 = build_initial(cfg.initial, cfg.params, cfg.solver.N, cfg.base_dir)
    h_list = list(cfg.h_list)
    tasks = [(cfg, mu0, h, out / f"h_{h:g}") for h in h_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            trajs = list(ex.map(_sweep_job, tasks))
    else:
        trajs = [_sweep_job(t) for t in tasks]
    ref = reference_for(mu0, cfg.T, cfg.params, h_list, cfg.pde)
    errors = [sup_error(tr, ref) for tr in trajs]
    report = convergence_report(h_list, errors)
    table = report.tables["convergence"]
    with open(out / "convergence.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["h", "sup_W2_error", "observed_order"])
        for h, e, o in zip(table["h"], table["error"], table["order"]):
            w.writerow([_fmt(h), _fmt(e), _fmt(o)])
    write_certificate(report, out)
    files = [f"h_{h:g}/" for h in h_list] + ["convergence.csv", "certificate.json", "certificate.csv"]
    if cfg.emit_plots:
        _plot(out / "convergence.svg", [(h_list, errors, "sup W2 error")], "h", "error", logy=True)
        files.append("convergence.svg")
    return files, report


def run(cfg: RunConfig, jobs: int = 1) -> int:
    """Execute the configured mode; returns the process exit status."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("mode=%s output=%s", cfg.mode, out)
    if cfg.mode in ("jko", "pde"):
        files, report = _mode_single(cfg, out)
    elif cfg.mode == "certify":
        files, report = _mode_certify(cfg, out)
    elif cfg.mode == "compare":
        files, report = _mode_compare(cfg, out)
    else:
        files, report = _mode_sweep(cfg, out, jobs)
    status = 0
    if report is not None:
        for c in report.failures():
            log.error("certificate check failed: %s (lhs=%.6g, rhs=%.6g, tol=%.3g)", c.name, c.lhs, c.rhs, c.tol)
        status = 0 if report.passed else 1
    write_manifest(cfg, out, files + ["manifest.json"], status)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="Moving-boundary gradient-flow simulations and certificates.")
    p.add_argument("--config", required=True, help="path to the JSON run configuration")
    p.add_argument("--mode", choices=MODES, help="override the configured mode")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs in sweep mode (default 1)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("WGF_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config, overrides={"mode": args.mode})
        if args.out:
            cfg.output_dir = Path(args.out)
            cfg.resolved["output_dir"] = args.out
        return run(cfg, jobs=args.jobs)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except WGFError as e:
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
