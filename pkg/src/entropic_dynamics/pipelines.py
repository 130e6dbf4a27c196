"""End-to-end runs of the three representations and the reports built on them.

Every function here takes a :class:`~entropic_dynamics.space.Scenario` and
returns plain data; writing files is left to :mod:`entropic_dynamics.cli`.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensemble import (WalkerEnsemble, arrow_diagnostic, estimate_density, initialize_walkers, l1_distance,
                       moments, propagate)
from .errors import ConfigError, NumericalError
from .fields import (FieldIntegrator, FieldModel, FieldState, drift_potential, ensemble_hamiltonian,
                     initial_state, momentum_expectation)
from .gauge import LinearGauge, SinusoidalGauge, invariance_report
from .kernel import DriftPotential, GaugeField
from .potentials import Free
from .states import GaussianState, free_packet_variance
from .wave import RegraduationConstants, SchrodingerSolver, WaveState, to_wave

L1_COARSEN = 4
MAX_SNAPSHOTS = 20
MAX_SERIES_ROWS = 200


def _stride(n_steps: int, count: int) -> int:
    return max(1, math.ceil(n_steps / count)) if n_steps else 1


def substeps(scenario) -> int:
    """Number of field steps per entropic step; dt must be a multiple of dt_field."""
    ratio = scenario.dt / scenario.dt_field
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise ConfigError(f"dt ({scenario.dt:g}) must be a whole multiple of dt_field ({scenario.dt_field:g})")
    return k


def spatial_variance(rho: np.ndarray, grid, axis: int = 0) -> float:
    """Variance of a grid density along one axis (plain quadrature)."""
    x = grid.mesh()[axis]
    mean = grid.integrate(rho * x)
    return float(grid.integrate(rho * (x - mean) ** 2))


def analytic_variance(scenario, t):
    """Closed-form position variance for a free Gaussian packet; None otherwise."""
    init = scenario.initial
    if not isinstance(scenario.potential, Free) or not isinstance(init, GaussianState):
        return None
    if scenario.vector_potential is not None:
        return None
    sigma0 = float(np.atleast_1d(init.sigma)[0])
    return free_packet_variance(t, sigma0, scenario.axis_masses[0], scenario.hbar)


def stable_field_step(scenario, grid=None) -> float:
    """Conservative step bound for the explicit part of the field update."""
    grid = grid or scenario.require_grid()
    omega = sum(0.5 * scenario.hbar / m * 3.0 / h**2 for m, h in zip(scenario.axis_masses, grid.spacing))
    return 1.0 / omega


# --- single pipelines ---------------------------------------------------------------


@dataclass
class FieldsRun:
    trajectory: list
    series_header: list
    series: list

    @property
    def final(self) -> FieldState:
        return self.trajectory[-1]


def _series_row(state, scenario, model):
    rep = ensemble_hamiltonian(state, scenario, model=model)
    P = momentum_expectation(state, scenario)
    return [state.t, rep.kinetic, rep.potential, rep.quantum, rep.total, state.norm] + [float(p) for p in P]


def _series_header(scenario):
    return ["t", "kinetic", "potential", "quantum", "total", "norm"] + \
        [f"P{a}" for a in range(scenario.spatial_dim)]


def run_fields(scenario, gauge: GaugeField | None = None, integrator: str = "leapfrog",
               snapshots: int = MAX_SNAPSHOTS, rows: int = MAX_SERIES_ROWS, state: FieldState | None = None,
               n_steps: int | None = None) -> FieldsRun:
    """Evolve (rho, Phi) to ``t_final``.

    Returns about ``snapshots`` evenly spaced states (always including the
    first and last) and an energy/momentum series of about ``rows`` rows.
    """
    model = FieldModel(scenario, gauge)
    integ = FieldIntegrator(model, integrator)
    state = state if state is not None else initial_state(scenario)
    n = scenario.n_field_steps if n_steps is None else n_steps
    snap_every, row_every = _stride(n, snapshots), _stride(n, rows)
    traj, series = [state], []
    try:
        series.append(_series_row(state, scenario, model))
        for k in range(1, n + 1):
            state = integ.step(state)
            if k % snap_every == 0 or k == n:
                traj.append(state)
            if k % row_every == 0 or k == n:
                series.append(_series_row(state, scenario, model))
    except NumericalError as exc:
        if exc.snapshot is None:
            exc.snapshot = state
        raise
    return FieldsRun(traj, _series_header(scenario), series)


@dataclass
class WaveRun:
    trajectory: list
    series_header: list
    series: list

    @property
    def final(self) -> WaveState:
        return self.trajectory[-1]


def run_wave(scenario, gauge: GaugeField | None = None, method: str = "auto", snapshots: int = MAX_SNAPSHOTS,
             rows: int = MAX_SERIES_ROWS, n_steps: int | None = None) -> WaveRun:
    """Evolve the Schrodinger reference from the mapped initial state."""
    grid = scenario.require_grid()
    solver = SchrodingerSolver(scenario, gauge, method)
    wave = to_wave(initial_state(scenario), RegraduationConstants.from_scenario(scenario))
    n = scenario.n_field_steps if n_steps is None else n_steps
    snap_every, row_every = _stride(n, snapshots), _stride(n, rows)

    def row(w):
        return [w.t, w.norm] + [spatial_variance(w.density, grid, a) for a in range(grid.ndim)]

    traj, series = [wave], [row(wave)]
    for k in range(1, n + 1):
        wave = solver.step(wave)
        if k % snap_every == 0 or k == n:
            traj.append(wave)
        if k % row_every == 0 or k == n:
            series.append(row(wave))
    return WaveRun(traj, ["t", "norm"] + [f"var{a}" for a in range(grid.ndim)], series)


class StaggeredDrift:
    """Per-step drift schedule driven by a field evolution.

    The step that starts at entropic instant n first advances the fields
    to t_(n+1) and then hands the walkers the drift potential of the
    updated state.  Calls must come in increasing step order.
    """

    def __init__(self, scenario, gauge: GaugeField | None = None, integrator: str = "leapfrog",
                 state: FieldState | None = None):
        self.scenario = scenario
        self.model = FieldModel(scenario, gauge)
        self.integrator = FieldIntegrator(self.model, integrator)
        self.state = state if state is not None else initial_state(scenario)
        self.substeps = substeps(scenario)
        self.step_index = 0

    def __call__(self, step_index: int, t: float) -> DriftPotential:
        if step_index != self.step_index:
            raise ValueError(f"drift schedule asked for step {step_index}, expected {self.step_index}")
        for _ in range(self.substeps):
            self.state = self.integrator.step(self.state)
        self.step_index += 1
        return drift_potential(self.state, self.scenario, model=self.model)


@dataclass
class WalkersRun:
    ensembles: list
    densities: list
    fields: list
    series_header: list
    series: list

    @property
    def final(self) -> WalkerEnsemble:
        return self.ensembles[-1]


def run_walkers(scenario, size: int | None = None, seed: int | None = None, gauge: GaugeField | None = None,
                jobs: int = 1, snapshots: int = MAX_SNAPSHOTS, static_phi: DriftPotential | None = None,
                n_steps: int | None = None) -> WalkersRun:
    """Propagate a walker ensemble through ``t_final / dt`` entropic steps.

    By default the drift follows the Hamiltonian field evolution
    (:class:`StaggeredDrift`).  Passing ``static_phi`` gives plain diffusion
    with a fixed drift potential instead.
    """
    grid = scenario.require_grid()
    if gauge is None:
        gauge = GaugeField.from_scenario(scenario)
    ens = initialize_walkers(scenario, size, seed=seed)
    n = scenario.n_steps if n_steps is None else n_steps
    every = _stride(n, snapshots)
    schedule = static_phi if static_phi is not None else StaggeredDrift(scenario, gauge)
    ensembles, densities, fields = [ens], [estimate_density(ens, grid, periodic=scenario.periodic, jobs=jobs)], []
    if not isinstance(schedule, DriftPotential):
        fields.append(schedule.state)

    def row(e):
        mean, var = moments(e)
        return [e.t, e.size - e.n_escaped, e.n_escaped] + [float(v) for v in mean] + [float(v) for v in var]

    series = [row(ens)]
    done = 0
    while done < n:
        k = min(every - done % every, n - done)
        ens = propagate(ens, schedule, gauge, scenario, k, jobs=jobs)
        done += k
        ensembles.append(ens)
        densities.append(estimate_density(ens, grid, periodic=scenario.periodic, jobs=jobs))
        if not isinstance(schedule, DriftPotential):
            fields.append(schedule.state)
        series.append(row(ens))
    header = ["t", "active", "escaped"] + [f"mean{a}" for a in range(ens.dim)] + [f"var{a}" for a in range(ens.dim)]
    return WalkersRun(ensembles, densities, fields, header, series)


# --- three-way comparison -----------------------------------------------------------


@dataclass
class CompareReport:
    header: list
    rows: list
    max_gap: float
    max_l1: float
    variance_errors: dict = field(default_factory=dict)
    walkers: int = 0

    def summary(self) -> dict:
        return {"max_abs_rho_fields_minus_wave_density": self.max_gap,
                "max_l1_walkers_vs_fields": self.max_l1,
                "l1_coarsening": L1_COARSEN,
                "walkers": self.walkers,
                "max_relative_variance_error": self.variance_errors}


def compare(scenario, size: int | None = None, seed: int | None = None, jobs: int = 1,
            snapshots: int = 10) -> CompareReport:
    """Run fields, walkers and wave side by side and tabulate their disagreement.

    Snapshot times are multiples of the entropic step; the wave solver
    uses ``dt_field`` like the fields.
    """
    grid = scenario.require_grid()
    walk = run_walkers(scenario, size, seed, jobs=jobs, snapshots=snapshots)
    solver = SchrodingerSolver(scenario)
    wave = to_wave(walk.fields[0], RegraduationConstants.from_scenario(scenario))
    sub = substeps(scenario)
    header = ["t", "max_abs_gap", "l1_walkers", "var_fields", "var_wave", "var_walkers", "var_exact"]
    rows = []
    errs = {"fields": 0.0, "wave": 0.0, "walkers": 0.0}
    for i, (ens, dens, fs) in enumerate(zip(walk.ensembles, walk.densities, walk.fields)):
        if i:
            steps = (ens.step_index - walk.ensembles[i - 1].step_index) * sub
            for _ in range(steps):
                wave = solver.step(wave)
        gap = float(np.max(np.abs(fs.rho - wave.density)))
        l1 = l1_distance(dens, fs.rho, grid, L1_COARSEN)
        v_f = spatial_variance(fs.rho, grid)
        v_w = spatial_variance(wave.density, grid)
        v_m = float(moments(ens)[1][0])
        exact = analytic_variance(scenario, fs.t)
        rows.append([fs.t, gap, l1, v_f, v_w, v_m, float("nan") if exact is None else float(exact)])
        if exact is not None:
            for key, v in (("fields", v_f), ("wave", v_w), ("walkers", v_m)):
                errs[key] = max(errs[key], abs(v / exact - 1.0))
    return CompareReport(header, rows, max(r[1] for r in rows), max(r[2] for r in rows[1:] or rows),
                         errs if analytic_variance(scenario, 0.0) is not None else {},
                         walk.final.size)


# --- convergence sweeps ---------------------------------------------------------------


@dataclass
class ConvergenceTable:
    """Errors against a refinement parameter with local and fitted orders.

    For self-convergence sweeps ``errors[i]`` compares run ``i`` with run
    ``i + 1``; ``orders[i]`` is the local order between rows i and i+1.
    """

    sweep: str
    pipeline: str
    parameters: list
    errors: list
    orders: list
    fitted_order: float

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    def rows(self):
        orders = self.orders + [float("nan")] * (len(self.errors) - len(self.orders))
        return [[self.pipeline, p, e, o] for p, e, o in zip(self.parameters, self.errors, orders)]


def _fit_order(params, errors) -> tuple[list, float]:
    p = np.log(np.asarray(params, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    local = list((e[:-1] - e[1:]) / (p[:-1] - p[1:]))
    slope = float(np.polyfit(p, e, 1)[0])
    return [float(v) for v in local], slope


def _final_density(scenario, pipeline: str, h: float, t_end: float) -> np.ndarray:
    n = int(round(t_end / h))
    sc = scenario.replace(dt_field=h)
    if pipeline == "fields":
        integ = FieldIntegrator(FieldModel(sc))
        state = initial_state(sc)
        for _ in range(n):
            state = integ.step(state)
        return state.rho
    solver = SchrodingerSolver(sc, warn=False)
    wave = to_wave(initial_state(sc), RegraduationConstants.from_scenario(sc))
    for _ in range(n):
        wave = solver.step(wave)
    return wave.density


def _map(fn, args, jobs):
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*args)))
    return [fn(*a) for a in args]


def dt_sweep(scenario, pipeline: str = "fields", steps=None, t_end: float | None = None,
             jobs: int = 1) -> ConvergenceTable:
    """Richardson self-convergence in the field/wave time step.

    ``steps`` defaults to dt_field * (1, 1/2, 1/4, 1/8).  The error of
    step h is max |rho_h - rho_(h/2)| at ``t_end`` (default ``t_final``).
    """
    if pipeline not in ("fields", "wave"):
        raise ValueError(f"unknown pipeline {pipeline!r}")
    steps = list(steps) if steps is not None else [scenario.dt_field / 2**k for k in range(4)]
    t_end = scenario.t_final if t_end is None else t_end
    for h in steps:
        if abs(t_end / h - round(t_end / h)) > 1e-9 * t_end / h:
            raise ConfigError(f"horizon {t_end:g} is not a whole number of steps of {h:g}")
    dens = _map(_final_density, [(scenario, pipeline, h, t_end) for h in steps], jobs)
    errors = [float(np.max(np.abs(a - b))) for a, b in zip(dens, dens[1:])]
    local, slope = _fit_order(steps[:-1], errors)
    return ConvergenceTable("dt_field", pipeline, steps[:-1], errors, local, slope)


def _grid_density(scenario, pipeline: str, points, h: float, t_end: float) -> np.ndarray:
    sc = scenario.replace(grid=scenario.grid.with_points(points))
    return _final_density(sc, pipeline, h, t_end)


def dx_sweep(scenario, pipeline: str = "fields", points=None, t_end: float | None = None,
             jobs: int = 1) -> ConvergenceTable:
    """Spatial self-convergence on nested grids at a fixed stable time step.

    The error of a grid is max |rho_N - rho_2N| on the nodes they share.
    """
    grid = scenario.require_grid()
    base = grid.points[0]
    points = list(points) if points is not None else [base // 2, base, 2 * base, 4 * base]
    t_end = scenario.t_final if t_end is None else t_end
    finest = grid.with_points(points[-1])
    h = min(scenario.dt_field, stable_field_step(scenario, finest))
    h = t_end / math.ceil(t_end / h)
    dens = _map(_grid_density, [(scenario, pipeline, p, h, t_end) for p in points], jobs)
    errors = []
    for a, b in zip(dens, dens[1:]):
        r = b.shape[0] // a.shape[0]
        errors.append(float(np.max(np.abs(a - b[(slice(None, None, r),) * b.ndim]))))
    spacing = [grid.lengths[0] / p for p in points[:-1]]
    local, slope = _fit_order(spacing, errors)
    return ConvergenceTable("dx", pipeline, spacing, errors, local, slope)


def joint_sweep(scenario, levels: int = 3, t_end: float | None = None, jobs: int = 1) -> ConvergenceTable:
    """Refine dx and dt_field together; error is max |rho_fields - |Psi|^2| at ``t_end``.

    Grids run from half the scenario's points upwards.  The step halves
    with every level but is capped by :func:`stable_field_step`; the order
    is fitted against the step actually used.
    """
    grid = scenario.require_grid()
    t_end = scenario.t_final if t_end is None else t_end
    points = [grid.points[0] // 2 * 2**k for k in range(levels)]
    hs = []
    for k, p in enumerate(points):
        h = min(2 * scenario.dt_field / 2**k, stable_field_step(scenario, grid.with_points(p)))
        hs.append(t_end / math.ceil(t_end / h - 1e-9))
    args = [(scenario, pipe, p, h, t_end) for p, h in zip(points, hs) for pipe in ("fields", "wave")]
    dens = _map(_grid_density, args, jobs)
    errors = [float(np.max(np.abs(dens[2 * i] - dens[2 * i + 1]))) for i in range(levels)]
    local, slope = _fit_order(hs, errors)
    return ConvergenceTable("joint", "fields-vs-wave", hs, errors, local, slope)


def _walker_error(scenario, size, seed, t_end):
    sc = scenario.replace(t_final=t_end)
    run = run_walkers(sc, size, seed, snapshots=1)
    return l1_distance(run.densities[-1], run.fields[-1].rho, sc.grid, L1_COARSEN)


def walker_sweep(scenario, sizes=(1000, 10_000, 100_000), t_end: float | None = None, seed: int | None = None,
                 jobs: int = 1) -> ConvergenceTable:
    """Coarsened histogram L1 error against the field density for growing ensembles.

    The fitted order is the exponent of M (about -1/2 for pure sampling noise).
    """
    t_end = scenario.t_final if t_end is None else t_end
    seed = scenario.seed if seed is None else seed
    errors = _map(_walker_error, [(scenario, M, seed, t_end) for M in sizes], jobs)
    local, slope = _fit_order(sizes, errors)
    return ConvergenceTable("walkers", "walkers", list(sizes), errors, local, slope)


SWEEPS = ("dt_field", "dx", "joint", "walkers")


def convergence(scenario, sweep: str, jobs: int = 1) -> list[ConvergenceTable]:
    if sweep == "dt_field":
        return [dt_sweep(scenario, "fields", jobs=jobs), dt_sweep(scenario, "wave", jobs=jobs)]
    if sweep == "dx":
        return [dx_sweep(scenario, "fields", jobs=jobs), dx_sweep(scenario, "wave", jobs=jobs)]
    if sweep == "joint":
        return [joint_sweep(scenario, jobs=jobs)]
    if sweep == "walkers":
        return [walker_sweep(scenario, jobs=jobs)]
    raise ValueError(f"unknown sweep {sweep!r}; choose from {', '.join(SWEEPS)}")


# --- arrow of time and gauge checks ---------------------------------------------------------


def arrow(scenario, n_probes: int = 7):
    """Bayes-reversal diagnostics for the scenario's initial density under pure diffusion."""
    grid = scenario.require_grid()
    rho = initial_state(scenario).rho
    return arrow_diagnostic(rho, DriftPotential.zero(grid.ndim), scenario, n_probes=n_probes)


def default_gauge_functions(scenario) -> dict:
    """A linear and a sinusoidal gauge function compatible with the scenario's domain.

    On a periodic grid the linear slope is one phase quantum per period, so
    exp(i chi / hbar) stays single-valued.
    """
    grid = scenario.require_grid()
    d = scenario.spatial_dim
    lengths = grid.lengths[:d]
    slope = 2 * np.pi * scenario.hbar / lengths[0] if scenario.periodic else 0.7
    return {"linear": LinearGauge((slope,) + (0.0,) * (d - 1)),
            "sinusoidal": SinusoidalGauge.periodic(0.3, lengths, modes=(1,) * d, phase=0.4)}


def gauge_check(scenario, n_steps: int | None = None, pipelines=("kernel", "fields", "wave"),
                chis: dict | None = None) -> list:
    """Invariance reports for every (gauge function, pipeline) pair.

    The wave pipeline needs a periodic grid and is skipped otherwise.
    """
    n = scenario.n_field_steps if n_steps is None else n_steps
    chis = chis or default_gauge_functions(scenario)
    out = []
    for name, chi in chis.items():
        for pipe in pipelines:
            if pipe == "wave" and not scenario.periodic:
                continue
            out.append((name, invariance_report(scenario, chi, pipe, n_steps=n)))
    return out
