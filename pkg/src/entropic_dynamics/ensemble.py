"""Walker ensembles advanced one entropic step at a time.

Every walker draws its noise from its own counter-based stream (see
:mod:`entropic_dynamics.rng`), so an ensemble advanced by one worker or by
many gives identical positions.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .kernel import DriftPotential, GaugeField, build_kernel
from .rng import PURPOSE_INIT, walker_normals, walker_uniforms

MIN_STATISTICAL_WALKERS = 1000


@dataclass(frozen=True)
class WalkerEnsemble:
    """Walker positions of shape (M, D) at instant ``step_index``.

    ``escaped`` flags walkers that left an open domain beyond the cutoff;
    they are frozen where they crossed it and never silently dropped.
    """

    positions: np.ndarray
    step_index: int = 0
    dt: float = 1e-3
    seed: int = 0
    escaped: np.ndarray | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "positions", pos)
        if self.escaped is None:
            object.__setattr__(self, "escaped", np.zeros(len(pos), dtype=bool))

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    @property
    def n_escaped(self) -> int:
        return int(np.count_nonzero(self.escaped))

    @classmethod
    def at_point(cls, point, size: int, dt: float, seed: int = 0) -> "WalkerEnsemble":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(np.tile(point, (size, 1)), 0, dt, seed)


def sample_density(rho: np.ndarray, grid, size: int, seed: int, periodic: bool = True) -> np.ndarray:
    """Inverse-CDF draw from a grid density, uniform within each node-centred cell."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or not np.sum(rho) > 0:
        raise ValueError("density must be non-negative with positive mass")
    cdf = np.cumsum(rho.ravel())
    cdf /= cdf[-1]
    u = walker_uniforms(seed, 0, 0, size, grid.ndim + 1, PURPOSE_INIT)
    flat = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), cdf.size - 1)
    idx = np.unravel_index(flat, grid.shape)
    pos = np.empty((size, grid.ndim))
    for a in range(grid.ndim):
        pos[:, a] = grid.lower[a] + (idx[a] + u[:, a + 1] - 0.5) * grid.spacing[a]
    return grid.wrap(pos) if periodic else pos


def initialize_walkers(scenario, size: int | None = None, rho: np.ndarray | None = None,
                       seed: int | None = None) -> WalkerEnsemble:
    """Draw walkers from ``rho`` (default: the scenario's initial density)."""
    from .fields import initial_state

    grid = scenario.require_grid()
    size = scenario.walkers if size is None else int(size)
    seed = scenario.seed if seed is None else int(seed)
    if rho is None:
        rho = initial_state(scenario).rho
    pos = sample_density(rho, grid, size, seed, scenario.periodic)
    return WalkerEnsemble(pos, 0, scenario.dt, seed)


# --- boundaries ---------------------------------------------------------------------


def reflect(x: np.ndarray, lower, upper) -> np.ndarray:
    """Specular reflection of overshoots back into [lower, upper]."""
    lo = np.asarray(lower, dtype=float)
    L = np.asarray(upper, dtype=float) - lo
    y = np.mod(x - lo, 2 * L)
    return lo + np.where(y > L, 2 * L - y, y)


def _apply_boundary(pos, escaped, scenario):
    grid = scenario.grid
    if scenario.boundary == "periodic":
        if grid is not None:
            pos = grid.wrap(pos)
        return pos, escaped
    if scenario.boundary == "reflecting":
        if grid is None:
            raise ValueError("reflecting walls need a grid")
        return reflect(pos, grid.lower, grid.upper), escaped
    cutoff = scenario.escape_cutoff
    if cutoff is not None:
        if grid is not None:
            lo = np.asarray(grid.lower) - cutoff
            hi = np.asarray(grid.upper) + cutoff
            out = np.any((pos < lo) | (pos > hi), axis=1)
        else:
            out = np.any(np.abs(pos) > cutoff, axis=1)
        escaped = escaped | out
    return pos, escaped


# --- propagation ------------------------------------------------------------------------


def _resolve(schedule, step_index: int, t: float):
    if schedule is None or isinstance(schedule, (DriftPotential, GaugeField)):
        return schedule
    return schedule(step_index, t)


def _advance_chunk(pos, start, stop, phi, gauge, scenario, seed, step_index, t):
    x = pos[start:stop]
    kern = build_kernel(x, phi, gauge, scenario, t)
    z = walker_normals(seed, step_index, start, stop, x.shape[1])
    return x + kern.mean + kern.std * z


def propagate(ensemble: WalkerEnsemble, phi, gauge, scenario, n_steps: int, jobs: int = 1,
              chunk: int = 65536) -> WalkerEnsemble:
    """Advance every walker ``n_steps`` maximum-entropy steps.

    ``phi`` and ``gauge`` may be fixed objects or callables
    ``(step_index, t) -> DriftPotential | GaugeField`` giving a per-step
    schedule (the drift seen by the step that starts at ``step_index``).
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if n_steps == 0:
        return ensemble
    if not math.isclose(ensemble.dt, scenario.dt, rel_tol=1e-12):
        raise ValueError("ensemble and scenario disagree on dt")
    pos = ensemble.positions.copy()
    escaped = ensemble.escaped.copy()
    M = len(pos)
    bounds = [(s, min(s + chunk, M)) for s in range(0, M, chunk)]
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 and len(bounds) > 1 else None
    try:
        for k in range(n_steps):
            n = ensemble.step_index + k
            t = n * scenario.dt
            ph, ga = _resolve(phi, n, t), _resolve(gauge, n, t)
            if pool is None:
                parts = [_advance_chunk(pos, a, b, ph, ga, scenario, ensemble.seed, n, t) for a, b in bounds]
            else:
                parts = list(pool.map(lambda ab: _advance_chunk(pos, ab[0], ab[1], ph, ga, scenario,
                                                                ensemble.seed, n, t), bounds))
            new = np.concatenate(parts)
            new[escaped] = pos[escaped]
            pos, escaped = _apply_boundary(new, escaped, scenario)
    finally:
        if pool is not None:
            pool.shutdown()
    return replace(ensemble, positions=pos, step_index=ensemble.step_index + n_steps, escaped=escaped)


# --- density estimation ----------------------------------------------------------------------


@dataclass(frozen=True)
class DensityEstimate:
    grid: object
    values: np.ndarray
    method: str = "histogram"
    count: int = 0

    @property
    def norm(self) -> float:
        return self.grid.integrate(self.values)


def _edges(grid):
    return [grid.lower[a] + (np.arange(grid.points[a] + 1) - 0.5) * grid.spacing[a] for a in range(grid.ndim)]


def estimate_density(ensemble: WalkerEnsemble, grid, method: str = "histogram", bandwidth: float | None = None,
                     periodic: bool = True, jobs: int = 1, chunk: int = 65536) -> DensityEstimate:
    """Normalized grid density from walker positions.

    Bins are centred on the grid nodes.  ``kde`` smooths the histogram
    with a Gaussian product kernel of the given bandwidth (binned KDE).
    Escaped walkers are left out.
    """
    pos = ensemble.positions[~ensemble.escaped]
    if len(pos) == 0:
        raise ValueError("cannot estimate a density from an empty ensemble")
    if periodic:
        half = np.asarray(grid.spacing) / 2
        pos = grid.wrap(pos + half) - half
    edges = _edges(grid)
    bounds = [(s, min(s + chunk, len(pos))) for s in range(0, len(pos), chunk)]

    def part(ab):
        return np.histogramdd(pos[ab[0]:ab[1]], bins=edges)[0]

    if jobs > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(part, bounds))
    else:
        parts = [part(ab) for ab in bounds]
    counts = np.zeros(grid.shape)
    for p in parts:
        counts += p
    total = counts.sum()
    if total == 0:
        raise ValueError("no walker falls inside the grid")
    values = counts / (total * grid.cell_volume)
    if method == "kde":
        if bandwidth is None:
            bandwidth = 1.06 * float(np.mean(np.std(pos, axis=0))) * len(pos) ** (-1 / 5)
        sigma = [bandwidth / h for h in grid.spacing]
        values = ndimage.gaussian_filter(values, sigma, mode="wrap" if periodic else "constant")
        values /= grid.integrate(values)
    elif method != "histogram":
        raise ValueError(f"unknown density estimator {method!r}")
    return DensityEstimate(grid, values, method, int(total))


def coarse_cells(values: np.ndarray, factor: int) -> np.ndarray:
    """Average over blocks of ``factor`` nodes along every axis."""
    shape = []
    for n in values.shape:
        shape += [n // factor, factor]
    return values.reshape(shape).mean(axis=tuple(range(1, 2 * values.ndim, 2)))


def l1_distance(estimate, rho: np.ndarray, grid, coarsen: int = 1) -> float:
    """int |rho_hat - rho| dx after averaging both over blocks of ``coarsen`` cells."""
    est = estimate.values if isinstance(estimate, DensityEstimate) else np.asarray(estimate)
    a = coarse_cells(est, coarsen)
    b = coarse_cells(np.asarray(rho, dtype=float), coarsen)
    return float(np.sum(np.abs(a - b)) * grid.cell_volume * coarsen**grid.ndim)


def moments(ensemble: WalkerEnsemble) -> tuple[np.ndarray, np.ndarray]:
    pos = ensemble.positions[~ensemble.escaped]
    return pos.mean(axis=0), pos.var(axis=0)


def write_walkers_csv(ensemble: WalkerEnsemble, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["walker_id"] + [f"x{a}" for a in range(ensemble.dim)] + ["escaped"])
        for i, (row, esc) in enumerate(zip(ensemble.positions, ensemble.escaped)):
            w.writerow([i] + [f"{v:.17g}" for v in row] + [int(esc)])


# --- arrow of time ------------------------------------------------------------------------------


@dataclass
class ArrowReport:
    """Bayes-reversed kernel diagnostics at a set of probe points.

    Scalar fields are maxima over the probes; the ``per_probe`` arrays keep
    the individual values.
    """

    kl_forward_reverse: float
    kl_to_gaussian: float
    reverse_excess_kurtosis: float
    quadrature_error: float
    kurtosis_quadrature_error: float
    probes: np.ndarray
    excluded: list
    per_probe: dict = field(default_factory=dict)


def _log_density_interpolator(rho: np.ndarray, grid, centre_index, radius: int, periodic: bool):
    """Local cubic interpolant of log rho around a node; None if any cell in the window is empty."""
    idx = []
    coords = []
    for a in range(grid.ndim):
        offs = np.arange(-radius, radius + 1)
        raw = centre_index[a] + offs
        if periodic:
            ids = np.mod(raw, grid.points[a])
        else:
            if raw[0] < 0 or raw[-1] >= grid.points[a]:
                return None
            ids = raw
        idx.append(ids)
        coords.append(grid.lower[a] + raw * grid.spacing[a])
    window = rho[np.ix_(*idx)]
    if np.any(window <= 0):
        return None
    logs = np.log(window)
    if grid.ndim == 1:
        spline = CubicSpline(coords[0], logs)
        return lambda pts: spline(pts[..., 0])
    interp = RegularGridInterpolator(coords, logs, method="cubic")
    return lambda pts: interp(pts.reshape(-1, grid.ndim)).reshape(pts.shape[:-1])


def _reverse_on_grid(x_next, log_rho, phi, gauge, scenario, n, width):
    D = len(x_next)
    k0 = build_kernel(x_next, phi, gauge, scenario)
    centre = x_next - k0.mean
    axes = [np.linspace(c - width * s, c + width * s, n) for c, s in zip(centre, k0.std)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
    kern = build_kernel(pts, phi, gauge, scenario)
    u = x_next - pts - kern.mean
    log_fwd = -0.5 * np.sum(kern.alpha * u * u, axis=-1) + 0.5 * np.sum(np.log(kern.alpha / (2 * np.pi)), axis=-1)
    logw = log_rho(pts) + log_fwd
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum() * cell
    return pts, w, cell, k0, D


def _reverse_stats(pts, w, cell, k0, x_next):
    D = pts.shape[-1]
    mean = np.array([np.sum(w * pts[..., a]) * cell for a in range(D)])
    dev = pts - mean
    var = np.array([np.sum(w * dev[..., a] ** 2) * cell for a in range(D)])
    m4 = np.array([np.sum(w * dev[..., a] ** 4) * cell for a in range(D)])
    kurt = m4 / var**2 - 3.0
    log_g = -0.5 * np.sum(dev**2 / var, axis=-1) - 0.5 * np.sum(np.log(2 * np.pi * var))
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_gauss = float(np.sum(np.where(w > 0, w * (np.log(w) - log_g), 0.0)) * cell)
    # naive reversal: the forward law with its mean displacement negated
    naive_centre = x_next - k0.mean
    u = pts - naive_centre
    log_q = -0.5 * np.sum(k0.alpha * u * u, axis=-1) + 0.5 * np.sum(np.log(k0.alpha / (2 * np.pi)))
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_fr = float(np.sum(np.where(w > 0, w * (np.log(w) - log_q), 0.0)) * cell)
    return mean, var, kurt, kl_gauss, kl_fr


def arrow_diagnostic(rho_t, phi: DriftPotential | None, scenario, probes=None, n_probes: int = 7,
                     gauge: GaugeField | None = None, nodes: int | None = None, width: float = 12.0) -> ArrowReport:
    """Excess kurtosis and non-Gaussianity of the Bayes-reversed kernel.

    ``rho_t`` is a :class:`DensityEstimate` or a grid array.  The density
    is interpolated by a local cubic fit of ``log rho``, which reproduces a
    Gaussian exactly.  The quadrature error is the change of every
    statistic when the local grid is halved.
    """
    grid = scenario.require_grid()
    rho = rho_t.values if isinstance(rho_t, DensityEstimate) else np.asarray(rho_t, dtype=float)
    if phi is None:
        phi = DriftPotential.zero(grid.ndim)
    if nodes is None:
        nodes = 801 if grid.ndim == 1 else 161
    kstd = np.sqrt(scenario.eta * scenario.dt / scenario.axis_masses)
    if probes is None:
        support = np.argwhere(rho > 1e-6 * rho.max())
        picks = support[np.linspace(0, len(support) - 1, n_probes + 2).astype(int)[1:-1]]
        probes = np.array([[grid.axis(a)[i[a]] for a in range(grid.ndim)] for i in picks])
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    used, excluded = [], []
    stats = {"kl_forward_reverse": [], "kl_to_gaussian": [], "reverse_excess_kurtosis": [],
             "reverse_mean": [], "naive_mean": [], "quadrature_error": [],
             "kurtosis_quadrature_error": []}
    for x_next in probes:
        k0 = build_kernel(x_next, phi, gauge, scenario)
        reach = width * kstd + np.abs(k0.mean)
        radius = int(np.ceil(np.max(reach / np.asarray(grid.spacing)))) + 4
        centre = tuple(int(np.round((x_next[a] - grid.lower[a]) / grid.spacing[a])) for a in range(grid.ndim))
        log_rho = _log_density_interpolator(rho, grid, centre, radius, scenario.periodic)
        if log_rho is None:
            excluded.append(tuple(x_next))
            continue
        fine = _reverse_stats(*_reverse_on_grid(x_next, log_rho, phi, gauge, scenario, nodes, width)[:4], x_next)
        coarse = _reverse_stats(*_reverse_on_grid(x_next, log_rho, phi, gauge, scenario, (nodes + 1) // 2,
                                                  width)[:4], x_next)
        mean, var, kurt, kl_g, kl_fr = fine
        qerr = max(abs(kl_g - coarse[3]), abs(kl_fr - coarse[4]))
        stats["kurtosis_quadrature_error"].append(float(np.max(np.abs(kurt - coarse[2]))))
        used.append(x_next)
        stats["kl_forward_reverse"].append(kl_fr)
        stats["kl_to_gaussian"].append(kl_g)
        stats["reverse_excess_kurtosis"].append(float(kurt[np.argmax(np.abs(kurt))]))
        stats["reverse_mean"].append(mean)
        stats["naive_mean"].append(x_next - k0.mean)
        stats["quadrature_error"].append(qerr)
    if not used:
        raise ValueError("every probe point sits next to an empty cell")
    per = {k: np.asarray(v) for k, v in stats.items()}
    return ArrowReport(
        kl_forward_reverse=float(np.max(np.abs(per["kl_forward_reverse"]))),
        kl_to_gaussian=float(np.max(np.abs(per["kl_to_gaussian"]))),
        reverse_excess_kurtosis=float(np.max(np.abs(per["reverse_excess_kurtosis"]))),
        quadrature_error=float(np.max(per["quadrature_error"])),
        kurtosis_quadrature_error=float(np.max(per["kurtosis_quadrature_error"])),
        probes=np.asarray(used), excluded=excluded, per_probe=per)


def chapman_kolmogorov_check(rho: np.ndarray, scenario, phi: DriftPotential | None = None) -> float:
    """max |K_dt K_dt rho - K_2dt rho| for a drift-free kernel on a periodic grid.

    Both sides are computed by FFT convolution, so the result measures the
    composition law alone (no sampling noise).
    """
    from .kernel import gaussian_convolve

    grid = scenario.require_grid()
    var = scenario.eta * scenario.dt / scenario.axis_masses
    two = gaussian_convolve(gaussian_convolve(rho, grid, var), grid, var)
    one = gaussian_convolve(rho, grid, 2 * var)
    return float(np.max(np.abs(two - one)))
