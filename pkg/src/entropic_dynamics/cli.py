"""Command-line harness.

Each subcommand loads one scenario file, runs a pipeline and writes into
``--out`` (default ``runs/<scenario>-<subcommand>``):

    manifest.json   what was run, with the sha256 of every artifact
    summary.json    the headline numbers of the run
    *.csv           time series and tables, 17 significant digits
    snapshots/      grid snapshots (binary, or CSV with ``--format csv``)

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import pipelines as pl
from .config import load_scenario
from .ensemble import write_walkers_csv
from .errors import ConfigError, InvariantViolation, NumericalError
from .snapshots import write_csv, write_field_state, write_grid_csv, write_snapshot

SUBCOMMANDS = ("fields", "walkers", "wave", "compare", "gauge-check", "convergence", "arrow")
WAVE_NORM_TOLERANCE = 1e-10


class Run:
    """Output directory plus the bookkeeping that ends up in the manifest."""

    def __init__(self, args, loaded, pipeline: str):
        self.args = args
        self.loaded = loaded
        self.scenario = loaded.scenario
        self.pipeline = pipeline
        self.out = Path(args.out) if args.out else Path("runs") / f"{self.scenario.name}-{pipeline}"
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(p)
        return p

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.path(name), header, rows)

    def snapshot(self, stem: str, grid, planes: dict, t: float) -> None:
        """One snapshot per file; planes are written in insertion order."""
        if self.args.format == "csv":
            write_grid_csv(self.path(f"snapshots/{stem}.csv"), grid, planes, t)
        else:
            write_snapshot(self.path(f"snapshots/{stem}.grid"), grid, list(planes.values()), t)

    def finish(self, summary: dict) -> None:
        with self.path("summary.json").open("w") as fh:
            json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
        sc = self.scenario
        manifest = {
            "engine_version": __version__,
            "pipeline": self.pipeline,
            "scenario": {"path": self.loaded.path, "sha256": self.loaded.digest, "name": sc.name},
            "seed": sc.seed,
            "resolution": {"grid": sc.grid.describe() if sc.grid is not None else None, "dt": sc.dt,
                           "dt_field": sc.dt_field, "t_final": sc.t_final, "walkers": sc.walkers,
                           "stencil_order": sc.stencil_order},
            "format": self.args.format,
            "output_directory": str(self.out),
            "artifacts": {str(p.relative_to(self.out)): _sha256(p) for p in self.files},
        }
        with (self.out / "manifest.json").open("w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# --- subcommands ------------------------------------------------------------------------


def cmd_fields(run: Run) -> dict:
    sc = run.scenario
    res = pl.run_fields(sc)
    for i, s in enumerate(res.trajectory):
        run.snapshot(f"fields_{i:04d}", s.grid, {"rho": s.rho, "Phi": s.Phi}, s.t)
    if sc.n_field_steps:
        run.csv("hamiltonian.csv", res.series_header, res.series)
    first, last = res.series[0], res.series[-1]
    return {"steps": sc.n_field_steps, "t_final": res.final.t, "norm_final": res.final.norm,
            "energy_initial": first[4], "energy_final": last[4],
            "relative_energy_drift": abs(last[4] - first[4]) / max(abs(first[4]), 1e-300),
            "snapshots": len(res.trajectory)}


def cmd_wave(run: Run) -> dict:
    sc = run.scenario
    res = pl.run_wave(sc)
    norms = np.array([r[1] for r in res.series])
    steps = max(sc.n_field_steps, 1)
    drift = float(np.max(np.abs(norms - norms[0]))) if len(norms) > 1 else 0.0
    if drift > WAVE_NORM_TOLERANCE * steps:
        raise InvariantViolation(f"wave norm drifted by {drift:.2e} over {steps} steps")
    for i, w in enumerate(res.trajectory):
        run.snapshot(f"wave_{i:04d}", w.grid, {"re": w.psi.real, "im": w.psi.imag}, w.t)
    if sc.n_field_steps:
        run.csv("wave_series.csv", res.series_header, res.series)
    return {"steps": sc.n_field_steps, "t_final": res.final.t, "norm_drift": drift,
            "variance_final": res.series[-1][2:]}


def cmd_walkers(run: Run) -> dict:
    sc = run.scenario
    res = pl.run_walkers(sc, jobs=run.args.jobs)
    for i, d in enumerate(res.densities):
        run.snapshot(f"density_{i:04d}", d.grid, {"rho_hat": d.values}, res.ensembles[i].t)
    write_walkers_csv(res.final, run.path("walkers_final.csv"))
    run.csv("walker_series.csv", res.series_header, res.series)
    l1 = [pl.l1_distance(d, f.rho, sc.grid, pl.L1_COARSEN) for d, f in zip(res.densities, res.fields)]
    return {"walkers": res.final.size, "steps": res.final.step_index, "escaped": res.final.n_escaped,
            "l1_vs_fields_final": l1[-1] if l1 else None, "l1_coarsening": pl.L1_COARSEN}


def cmd_compare(run: Run) -> dict:
    rep = pl.compare(run.scenario, jobs=run.args.jobs)
    run.csv("compare.csv", rep.header, rep.rows)
    return rep.summary()


def cmd_gauge_check(run: Run) -> dict:
    reports = pl.gauge_check(run.scenario)
    rows = []
    for name, rep in reports:
        for key, val in rep.rows():
            rows.append([name, rep.pipeline, "deviation", key, val])
        for key, val in sorted(rep.changed.items()):
            rows.append([name, rep.pipeline, "changed", key, val])
    run.csv("gauge_report.csv", ["chi", "pipeline", "kind", "observable", "value"], rows)
    return {f"{name}/{rep.pipeline}": rep.max_deviation for name, rep in reports}


def cmd_convergence(run: Run) -> dict:
    tables = pl.convergence(run.scenario, run.args.sweep, jobs=run.args.jobs)
    rows = [r for tab in tables for r in tab.rows()]
    run.csv(f"convergence_{run.args.sweep}.csv", ["pipeline", "parameter", "error", "local_order"], rows)
    return {tab.pipeline: {"fitted_order": tab.fitted_order, "monotone": tab.monotone, "errors": tab.errors}
            for tab in tables}


def cmd_arrow(run: Run) -> dict:
    rep = pl.arrow(run.scenario, n_probes=run.args.probes)
    per = rep.per_probe
    header = ["probe"] + [f"x{a}" for a in range(rep.probes.shape[1])] + \
        ["kl_forward_reverse", "kl_to_gaussian", "reverse_excess_kurtosis", "quadrature_error"]
    rows = [[i] + [float(v) for v in p] + [float(per["kl_forward_reverse"][i]), float(per["kl_to_gaussian"][i]),
                                           float(per["reverse_excess_kurtosis"][i]),
                                           float(per["quadrature_error"][i])]
            for i, p in enumerate(rep.probes)]
    run.csv("arrow.csv", header, rows)
    return {"kl_forward_reverse": rep.kl_forward_reverse, "kl_to_gaussian": rep.kl_to_gaussian,
            "reverse_excess_kurtosis": rep.reverse_excess_kurtosis, "quadrature_error": rep.quadrature_error,
            "excluded_probes": rep.excluded}


COMMANDS = {"fields": cmd_fields, "walkers": cmd_walkers, "wave": cmd_wave, "compare": cmd_compare,
            "gauge-check": cmd_gauge_check, "convergence": cmd_convergence, "arrow": cmd_arrow}


# --- entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropic", description="Run entropic-dynamics scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config_path", nargs="?", help="scenario file (same as --config)")
    common.add_argument("--config", help="scenario file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--walkers", type=int, help="override the ensemble size")
    common.add_argument("--dt-field", type=float, help="override the field time step")
    common.add_argument("--grid", help="override the grid, e.g. -20:20:512")
    common.add_argument("--jobs", type=int, default=1, help="worker count for walkers and sweeps")
    common.add_argument("--format", choices=("csv", "grid"), default="grid", help="snapshot format")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "convergence":
            p.add_argument("--sweep", choices=pl.SWEEPS, default="dt_field")
        if name == "arrow":
            p.add_argument("--probes", type=int, default=7)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    path = args.config or args.config_path
    if path is None:
        print("error: a scenario file is required (positional or --config)", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    overrides = {"seed": args.seed, "walkers": args.walkers, "dt_field": args.dt_field, "grid": args.grid}
    run = None
    try:
        loaded = load_scenario(path, overrides)
        loaded.scenario.require_grid()
        run = Run(args, loaded, args.command)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            summary = COMMANDS[args.command](run)
        run.finish(summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericalError as exc:
        where = _diagnostic(run, exc)
        print(f"numerical failure: {exc}" + (f"; diagnostic snapshot: {where}" if where else ""), file=sys.stderr)
        return exc.exit_code
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    print(f"artifacts in {run.out}")
    return 0


def _diagnostic(run, exc) -> str | None:
    state = getattr(exc, "snapshot", None)
    if run is None or state is None:
        return None
    p = run.out / "diagnostic.grid"
    write_field_state(p, state)
    return str(p)


if __name__ == "__main__":
    sys.exit(main())
