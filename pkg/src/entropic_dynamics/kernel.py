"""Maximum-entropy short-step transition kernels.

Maximizing the entropy of P(x'|x) under the displacement constraints
gives a Gaussian with per-particle precision ``alpha_n = m_n / (eta dt)``
and mean ``b dt`` where ``b^A = m^AB (eta d_B phi - A_B)``.  The vector
potential enters through its configuration-space lift
``A_A(x) = eta alpha''_n A_a(x_n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

# --- drift potential ---------------------------------------------------------


class DriftPotential:
    """Scalar drift potential phi on configuration space.

    Either closed form (``value`` and ``gradient`` callables acting on
    points of shape ``(..., D)``) or grid samples.  Grid gradients use
    second-order centred differences unless supplied; both are sampled at
    arbitrary points by multilinear interpolation.  Gauge shifts added by
    :meth:`shifted` keep their exact gradients.

    Examples
    --------
    >>> phi = DriftPotential.linear([2.0])
    >>> phi.gradient(np.array([[0.3]]))
    array([[2.]])
    """

    def __init__(self, value: Callable | None = None, gradient: Callable | None = None, *,
                 dim: int | None = None, grid=None, values=None, gradient_values=None,
                 periodic: bool = True, shifts: tuple = (), layout: tuple[int, int] | None = None):
        self._value = value
        self._gradient = gradient
        self.grid = grid
        self.periodic = periodic
        self.shifts = tuple(shifts)
        self.layout = layout
        if grid is not None:
            self.dim = grid.ndim
            self.values = np.asarray(values, dtype=float)
            if gradient_values is None:
                gradient_values = _centred_gradient(self.values, grid, periodic)
            self.gradient_values = [np.asarray(g, dtype=float) for g in gradient_values]
        else:
            if dim is None:
                raise ValueError("closed-form drift potentials need an explicit dimension")
            self.dim = int(dim)
            self.values = None
            self.gradient_values = None

    # constructors
    @classmethod
    def zero(cls, dim: int) -> "DriftPotential":
        return cls(lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros(np.shape(x)), dim=dim)

    @classmethod
    def linear(cls, slope) -> "DriftPotential":
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        return cls(lambda x: np.asarray(x) @ slope,
                   lambda x: np.broadcast_to(slope, np.shape(x)).copy(), dim=slope.size)

    @classmethod
    def from_grid(cls, grid, values, periodic: bool = True, gradient_values=None) -> "DriftPotential":
        return cls(grid=grid, values=values, gradient_values=gradient_values, periodic=periodic)

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_grid:
            out = _interpolate(self.values, self.grid, x, self.periodic)
        else:
            out = np.asarray(self._value(x), dtype=float)
        for chi, scale in self.shifts:
            out = out + scale * chi.lifted_value(x, *self._layout())
        return out

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_grid:
            if self.grid.ndim == 1:
                w = _linear_weights(self.grid, x, self.periodic)
                out = np.stack([_apply_weights(g, w) for g in self.gradient_values], axis=-1)
            else:
                out = np.stack([_interpolate(g, self.grid, x, self.periodic) for g in self.gradient_values],
                               axis=-1)
        else:
            out = np.asarray(self._gradient(x), dtype=float)
        for chi, scale in self.shifts:
            out = out + scale * chi.lifted_gradient(x, *self._layout())
        return out

    def _layout(self) -> tuple[int, int]:
        return self.layout if self.layout is not None else (1, self.dim)

    def shifted(self, chi, scale: float, layout: tuple[int, int] | None = None) -> "DriftPotential":
        """phi + scale * chi_bar, with chi_bar the configuration-space lift of ``chi``."""
        new = object.__new__(DriftPotential)
        new.__dict__.update(self.__dict__)
        new.shifts = self.shifts + ((chi, float(scale)),)
        if layout is not None:
            new.layout = layout
        return new


def _centred_gradient(values: np.ndarray, grid, periodic: bool) -> list[np.ndarray]:
    out = []
    for a, h in enumerate(grid.spacing):
        if periodic:
            g = (np.roll(values, -1, axis=a) - np.roll(values, 1, axis=a)) / (2 * h)
        else:
            g = np.gradient(values, h, axis=a, edge_order=2)
        out.append(g)
    return out


def _linear_weights(grid, x: np.ndarray, periodic: bool):
    """Left node index and fraction for linear interpolation on a 1D grid."""
    s = (x[..., 0] - grid.lower[0]) / grid.spacing[0]
    n = grid.points[0]
    i = np.floor(s)
    frac = s - i
    i = i.astype(np.intp)
    if periodic:
        i = np.mod(i, n)
        j = np.where(i + 1 == n, 0, i + 1)
    else:
        # constant continuation beyond the end nodes
        frac = np.where(i < 0, 0.0, np.where(i >= n - 1, 1.0, frac))
        i = np.clip(i, 0, n - 2)
        j = i + 1
    return i, j, frac


def _apply_weights(field: np.ndarray, w) -> np.ndarray:
    i, j, frac = w
    return field[i] + frac * (field[j] - field[i])


def _interpolate(field: np.ndarray, grid, x: np.ndarray, periodic: bool) -> np.ndarray:
    lead = x.shape[:-1]
    pts = x.reshape(-1, grid.ndim)
    if grid.ndim == 1:
        return _apply_weights(field, _linear_weights(grid, pts, periodic)).reshape(lead)
    coords = [(pts[:, a] - grid.lower[a]) / grid.spacing[a] for a in range(grid.ndim)]
    mode = "grid-wrap" if periodic else "nearest"
    return ndimage.map_coordinates(field, coords, order=1, mode=mode).reshape(lead)


# --- gauge field --------------------------------------------------------------


@dataclass(frozen=True)
class GaugeField:
    """Per-particle vector potential and its configuration-space lift.

    ``potential`` is a :class:`~entropic_dynamics.potentials.VectorPotential`
    (or ``None``); ``shifts`` are gauge functions whose gradients have been
    added to the lifted field by a gauge transformation.
    """

    potential: object
    charges: tuple
    eta: float
    n_particles: int
    spatial_dim: int
    shifts: tuple = ()

    @classmethod
    def from_scenario(cls, scenario) -> "GaugeField | None":
        if scenario.vector_potential is None:
            return None
        return cls(scenario.vector_potential, tuple(scenario.charges), scenario.eta,
                   scenario.n_particles, scenario.spatial_dim)

    @classmethod
    def empty(cls, scenario) -> "GaugeField":
        return cls(None, tuple(scenario.charges), scenario.eta, scenario.n_particles, scenario.spatial_dim)

    @property
    def time_dependent(self) -> bool:
        return bool(getattr(self.potential, "time_dependent", False))

    def lifted(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=float)
        d = self.spatial_dim
        if self.potential is not None:
            for n, q in enumerate(self.charges):
                sl = slice(n * d, (n + 1) * d)
                out[..., sl] = self.eta * q * self.potential.spatial(x[..., sl], t)
        for chi in self.shifts:
            out = out + chi.lifted_gradient(x, self.n_particles, d)
        return out

    def lifted_time_derivative(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=float)
        d = self.spatial_dim
        if self.potential is not None:
            for n, q in enumerate(self.charges):
                sl = slice(n * d, (n + 1) * d)
                out[..., sl] = self.eta * q * self.potential.time_derivative(x[..., sl], t)
        return out

    def with_shift(self, chi) -> "GaugeField":
        return GaugeField(self.potential, self.charges, self.eta, self.n_particles,
                          self.spatial_dim, self.shifts + (chi,))


@dataclass(frozen=True)
class ElectricCharge:
    """Charge identified with the gauge multiplier, e_n = eta c alpha''_n."""

    values: tuple
    c: float


def electric_charges(scenario, c: float = 1.0) -> ElectricCharge:
    return ElectricCharge(tuple(scenario.eta * c * q for q in scenario.charges), c)


# --- kernel -------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionKernel:
    """Gaussian short-step law; arrays may carry leading batch axes.

    ``alpha`` holds the precision per configuration axis, so the covariance
    is ``1 / alpha = eta dt / m_n`` on every axis of particle n.
    """

    x: np.ndarray
    alpha: np.ndarray
    mean: np.ndarray
    dt: float
    spatial_dim: int
    phi_gradient: np.ndarray = field(repr=False, default=None)
    gauge_value: np.ndarray = field(repr=False, default=None)

    @property
    def covariance(self) -> np.ndarray:
        return 1.0 / self.alpha

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(1.0 / self.alpha)

    @property
    def drift(self) -> np.ndarray:
        return self.mean / self.dt

    def log_pdf(self, x_next) -> np.ndarray:
        return log_pdf(self, x_next)


def drift_velocity(x, phi: DriftPotential, gauge: GaugeField | None, scenario, t: float = 0.0) -> np.ndarray:
    """b^A = m^AB (eta d_B phi - A_B) at points of shape (..., D)."""
    x = np.asarray(x, dtype=float)
    force = scenario.eta * phi.gradient(x)
    if gauge is not None:
        force = force - gauge.lifted(x, t)
    return force / scenario.axis_masses


def build_kernel(x, phi: DriftPotential, gauge: GaugeField | None, scenario, t: float = 0.0) -> TransitionKernel:
    if not scenario.dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    grad = phi.gradient(x)
    gauge_value = gauge.lifted(x, t) if gauge is not None else np.zeros_like(x)
    b = (scenario.eta * grad - gauge_value) / scenario.axis_masses
    alpha = scenario.axis_masses / (scenario.eta * scenario.dt)
    return TransitionKernel(x=x, alpha=np.broadcast_to(alpha, x.shape).copy(), mean=b * scenario.dt,
                            dt=scenario.dt, spatial_dim=scenario.spatial_dim,
                            phi_gradient=grad, gauge_value=gauge_value)


def log_pdf(kernel: TransitionKernel, x_next) -> np.ndarray:
    """Exact Gaussian log-density of x' under the kernel, normalization included."""
    u = np.asarray(x_next, dtype=float) - kernel.x - kernel.mean
    a = kernel.alpha
    return -0.5 * np.sum(a * u * u, axis=-1) + 0.5 * np.sum(np.log(a / (2 * np.pi)), axis=-1)


def sample_step(kernel: TransitionKernel, stream) -> np.ndarray:
    """Displacement mean + noise; ``stream`` provides ``standard_normal(shape)``."""
    z = stream.standard_normal(np.shape(kernel.mean))
    return kernel.mean + kernel.std * z


def metric_by_quadrature(scenario, C: float | None = None, x=None, phi: DriftPotential | None = None,
                         order: int = 40) -> np.ndarray:
    """gamma_AB = C <d_A log P d_B log P> by Gauss-Hermite quadrature over x'.

    Derivatives are taken with respect to the base point ``x`` by central
    differences of :func:`log_pdf`.
    """
    D = scenario.config_dim
    if C is None:
        C = scenario.eta * scenario.dt
    if x is None:
        x = np.zeros(D)
    if phi is None:
        phi = DriftPotential.zero(D)
    x = np.asarray(x, dtype=float)
    kern = build_kernel(x, phi, None, scenario)
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    grids = np.meshgrid(*([nodes] * D), indexing="ij")
    wts = np.prod(np.meshgrid(*([weights] * D), indexing="ij"), axis=0) / np.pi ** (D / 2)
    pts = np.stack([kern.x[a] + kern.mean[a] + np.sqrt(2) * kern.std[a] * grids[a] for a in range(D)], axis=-1)
    scores = []
    for a in range(D):
        h = 1e-4 * kern.std[a]
        e = np.zeros(D)
        e[a] = h
        up = log_pdf(build_kernel(x + e, phi, None, scenario), pts)
        dn = log_pdf(build_kernel(x - e, phi, None, scenario), pts)
        scores.append((up - dn) / (2 * h))
    gamma = np.empty((D, D))
    for a in range(D):
        for b in range(D):
            gamma[a, b] = C * np.sum(wts * scores[a] * scores[b])
    return gamma


def relative_entropy(p: np.ndarray, q: np.ndarray, cell: float) -> float:
    """S[p, q] = -sum p log(p / q) dx on a shared grid (zero where p vanishes)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    return float(-np.sum(p[mask] * np.log(p[mask] / q[mask])) * cell)


def kl_divergence(p: np.ndarray, q: np.ndarray, cell: float) -> float:
    return -relative_entropy(p, q, cell)


# --- Chapman-Kolmogorov on a grid ------------------------------------------------


def transition_matrix(grid, phi: DriftPotential, gauge: GaugeField | None, scenario,
                      t: float = 0.0, images: int = 2) -> np.ndarray:
    """Dense matrix K with (K rho)_i = sum_j P(x_i | x_j) rho_j dV.

    Periodic grids sum the Gaussian over ``images`` periodic copies per side.
    """
    pts = grid.points_array().reshape(-1, grid.ndim)
    kern = build_kernel(pts, phi, gauge, scenario, t)
    centre = pts + kern.mean
    diff = pts[:, None, :] - centre[None, :, :]
    if scenario.periodic:
        L = np.asarray(grid.lengths)
        diff = np.mod(diff + L / 2, L) - L / 2
        shifts = np.arange(-images, images + 1)
        total = np.zeros(diff.shape[:2])
        mesh = np.meshgrid(*([shifts] * grid.ndim), indexing="ij")
        for combo in zip(*(m.ravel() for m in mesh)):
            u = diff + np.asarray(combo) * L
            total += np.exp(-0.5 * np.sum(kern.alpha[None, :, :] * u * u, axis=-1))
    else:
        total = np.exp(-0.5 * np.sum(kern.alpha[None, :, :] * diff * diff, axis=-1))
    norm = np.prod(np.sqrt(kern.alpha / (2 * np.pi)), axis=-1)
    return total * norm[None, :] * grid.cell_volume


def chapman_kolmogorov(rho: np.ndarray, grid, phi: DriftPotential, gauge: GaugeField | None, scenario,
                       n_steps: int = 1, t: float = 0.0, matrix: np.ndarray | None = None) -> np.ndarray:
    """rho(x', t + n dt) = int P(x'|x) rho(x, t) dx iterated on the grid."""
    if matrix is None:
        matrix = transition_matrix(grid, phi, gauge, scenario, t)
    flat = np.asarray(rho, dtype=float).ravel()
    for _ in range(n_steps):
        flat = matrix @ flat
    return flat.reshape(grid.shape)


def gaussian_convolve(rho: np.ndarray, grid, variance, shift=None) -> np.ndarray:
    """Periodic convolution with a Gaussian of per-axis variance, done by FFT.

    The Fourier symbol of the continuous Gaussian is used, which equals the
    wrapped Gaussian's symbol exactly.
    """
    variance = np.broadcast_to(np.atleast_1d(variance), (grid.ndim,))
    shift = np.zeros(grid.ndim) if shift is None else np.broadcast_to(np.atleast_1d(shift), (grid.ndim,))
    spec = np.fft.fftn(rho)
    for a in range(grid.ndim):
        k = 2 * np.pi * np.fft.fftfreq(grid.points[a], d=grid.spacing[a])
        sym = np.exp(-0.5 * variance[a] * k**2 - 1j * k * shift[a])
        shape = [1] * grid.ndim
        shape[a] = -1
        spec = spec * sym.reshape(shape)
    return np.real(np.fft.ifftn(spec))


# --- Bayes-reversed kernel ------------------------------------------------------


def _local_nodes(centre: np.ndarray, half_width: np.ndarray, n: int):
    axes = [np.linspace(c - w, c + w, n) for c, w in zip(centre, half_width)]
    cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return pts, cell


def reverse_kernel_grid(x_next, kernel_builder: Callable, rho: Callable, n: int = 801,
                        width: float = 14.0):
    """Bayes-reversed kernel P(x|x') tabulated on a local quadrature grid.

    Returns ``(points, values, cell, normalizer)`` where ``normalizer`` is
    rho(x', t') from the Chapman-Kolmogorov quadrature.
    """
    x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
    k0 = kernel_builder(x_next)
    centre = x_next - k0.mean
    pts, cell = _local_nodes(centre, width * k0.std, n)
    kern = kernel_builder(pts)
    log_fwd = log_pdf(kern, x_next)
    dens = np.asarray(rho(pts), dtype=float)
    with np.errstate(divide="ignore"):
        log_joint = np.log(dens) + log_fwd
    normalizer = float(np.sum(np.exp(log_joint)) * cell)
    if not normalizer > 0:
        raise ValueError("rho(x', t') vanishes; the reversed kernel is undefined")
    return pts, np.exp(log_joint) / normalizer, cell, normalizer


def reverse_log_pdf(x_prev, x_next, kernel_builder: Callable, rho: Callable, n: int = 801) -> np.ndarray:
    """log P(x|x') = log rho(x) + log P(x'|x) - log rho(x', t').

    ``kernel_builder(points)`` returns the forward kernel based at ``points``
    and ``rho(points)`` evaluates the density at time t.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
    _, _, _, normalizer = reverse_kernel_grid(x_next, kernel_builder, rho, n=n)
    kern = kernel_builder(x_prev)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(rho(x_prev), dtype=float)) + log_pdf(kern, x_next) - np.log(normalizer)
