"""Gauge transformations and invariance checks.

A gauge function chi acts on one particle's physical space and is lifted
to configuration space as ``chi_bar(x) = sum_n chi(x_n)``.  The transform
shifts

    phi -> phi + chi_bar / eta,    Phi -> Phi + chi_bar,
    A_A -> A_A + d_A chi_bar,      Psi -> Psi exp(i chi_bar / hbar),

and leaves rho, the drift, the current velocity and the ensemble
Hamiltonian unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import DriftPotential, GaugeField, build_kernel
from .space import GridSpec


class GaugeFunction:
    """Scalar chi(y) on one particle's physical space, y of shape (..., d)."""

    def value(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def seam_jump(self, lower, lengths) -> np.ndarray:
        """chi(y + L_a e_a) - chi(y) at the lower corner, per spatial axis."""
        lower = np.asarray(lower, dtype=float)
        out = []
        for a, L in enumerate(lengths):
            e = np.zeros_like(lower)
            e[a] = L
            out.append(float(self.value(lower + e) - self.value(lower)))
        return np.asarray(out)

    def lifted_value(self, x, n_particles: int, d: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(self.value(x[..., n * d:(n + 1) * d]) for n in range(n_particles))

    def lifted_gradient(self, x, n_particles: int, d: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for n in range(n_particles):
            sl = slice(n * d, (n + 1) * d)
            out[..., sl] = self.gradient(x[..., sl])
        return out


@dataclass(frozen=True)
class ConstantGauge(GaugeFunction):
    constant: float = 1.0

    def value(self, y):
        return np.full(np.shape(y)[:-1], self.constant)

    def gradient(self, y):
        return np.zeros(np.shape(y))


@dataclass(frozen=True)
class LinearGauge(GaugeFunction):
    """chi(y) = slope . y; a scalar slope acts along the first axis."""

    slope: tuple = (1.0,)

    def _slope(self, d: int) -> np.ndarray:
        s = np.atleast_1d(np.asarray(self.slope, dtype=float))
        if s.size == 1 and d > 1:
            s = np.concatenate((s, np.zeros(d - 1)))
        if s.size != d:
            raise ValueError(f"linear gauge needs {d} slope components")
        return s

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return y @ self._slope(y.shape[-1])

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self._slope(y.shape[-1]), y.shape).copy()


@dataclass(frozen=True)
class SinusoidalGauge(GaugeFunction):
    """chi(y) = amplitude * sin(wavevector . y + phase)."""

    amplitude: float = 1.0
    wavevector: tuple = (1.0,)
    phase: float = 0.0

    def _k(self, d: int) -> np.ndarray:
        k = np.atleast_1d(np.asarray(self.wavevector, dtype=float))
        if k.size == 1 and d > 1:
            k = np.concatenate((k, np.zeros(d - 1)))
        return k

    @classmethod
    def periodic(cls, amplitude: float, lengths, modes=(1,), phase: float = 0.0) -> "SinusoidalGauge":
        modes = np.broadcast_to(np.atleast_1d(modes), (len(lengths),))
        return cls(amplitude, tuple(2 * np.pi * n / L for n, L in zip(modes, lengths)), phase)

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return self.amplitude * np.sin(y @ self._k(y.shape[-1]) + self.phase)

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        k = self._k(y.shape[-1])
        return self.amplitude * np.cos(y @ k + self.phase)[..., None] * k


@dataclass(frozen=True)
class GridGauge(GaugeFunction):
    """chi sampled on a periodic physical-space grid.

    Gradients are spectral; both value and gradient are sampled at
    arbitrary points by multilinear interpolation.
    """

    grid: GridSpec
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != self.grid.shape:
            raise ValueError("samples must match the gauge grid")
        object.__setattr__(self, "samples", samples)
        grads = []
        spec = np.fft.fftn(samples)
        for a in range(self.grid.ndim):
            k = 2 * np.pi * np.fft.fftfreq(self.grid.points[a], d=self.grid.spacing[a])
            shape = [1] * self.grid.ndim
            shape[a] = -1
            grads.append(np.real(np.fft.ifftn(1j * k.reshape(shape) * spec)))
        object.__setattr__(self, "_grads", grads)

    def _interp(self, f, y):
        from .kernel import _interpolate

        return _interpolate(f, self.grid, np.asarray(y, dtype=float), True)

    def value(self, y):
        return self._interp(self.samples, y)

    def gradient(self, y):
        return np.stack([self._interp(g, y) for g in self._grads], axis=-1)

    def seam_jump(self, lower, lengths):
        return np.zeros(len(lengths))


# --- transforms -------------------------------------------------------------------


def _base_gauge(gauge, scenario) -> GaugeField:
    return gauge if gauge is not None else GaugeField.empty(scenario)


def lifted_winding(chi: GaugeFunction, scenario, grid) -> np.ndarray:
    """Seam jump of chi_bar along every configuration axis of ``grid``."""
    if not scenario.periodic:
        return np.zeros(grid.ndim)
    d = scenario.spatial_dim
    out = np.zeros(grid.ndim)
    for n in range(scenario.n_particles):
        sl = slice(n * d, (n + 1) * d)
        out[sl] = chi.seam_jump(np.asarray(grid.lower)[sl], np.asarray(grid.lengths)[sl])
    return out


def transform(target, gauge: GaugeField | None, chi: GaugeFunction, scenario):
    """Apply the gauge transformation to a drift potential, field state or wave state.

    Returns ``(transformed_target, transformed_gauge)``; the density is
    never touched.
    """
    from .fields import FieldState
    from .wave import WaveState

    new_gauge = _base_gauge(gauge, scenario).with_shift(chi)
    N, d = scenario.n_particles, scenario.spatial_dim
    if isinstance(target, DriftPotential):
        return target.shifted(chi, 1.0 / scenario.eta, (N, d)), new_gauge
    if isinstance(target, FieldState):
        grid = target.grid
        shift = chi.lifted_value(grid.points_array(), N, d)
        winding = tuple(np.asarray(target.winding) + lifted_winding(chi, scenario, grid))
        return target.with_fields(Phi=target.Phi + shift, winding=winding), new_gauge
    if isinstance(target, WaveState):
        grid = target.grid
        jumps = lifted_winding(chi, scenario, grid)
        hbar = scenario.hbar if target.k is None else scenario.eta / target.k
        n = jumps / (2 * np.pi * hbar)
        if np.any(np.abs(n - np.round(n)) > 1e-9):
            raise ValueError("gauge function winds by a non-integer number of phase quanta across "
                             "the periodic seam; exp(i chi / hbar) would not be single-valued")
        shift = chi.lifted_value(grid.points_array(), N, d)
        return WaveState(grid, target.psi * np.exp(1j * shift / hbar), target.t, target.k), new_gauge
    raise TypeError(f"cannot gauge-transform {type(target).__name__}")


# --- invariance report --------------------------------------------------------------


@dataclass
class InvarianceReport:
    pipeline: str
    deviations: dict
    changed: dict
    steps: int = 0

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    def rows(self) -> list[tuple[str, float]]:
        return sorted(self.deviations.items())


def _kernel_report(scenario, chi, gauge, phi, points):
    D = scenario.config_dim
    if points is None:
        rng = np.random.default_rng(scenario.seed)
        if scenario.grid is not None:
            lo, hi = np.asarray(scenario.grid.lower), np.asarray(scenario.grid.upper)
        else:
            lo, hi = -np.ones(D), np.ones(D)
        points = lo + (hi - lo) * rng.random((64, D))
    if phi is None:
        phi = DriftPotential(lambda x: np.sin(np.sum(x, axis=-1)),
                             lambda x: np.cos(np.sum(x, axis=-1))[..., None] * np.ones(D), dim=D)
    base = _base_gauge(gauge, scenario)
    k0 = build_kernel(points, phi, base, scenario)
    phi1, gauge1 = transform(phi, base, chi, scenario)
    k1 = build_kernel(points, phi1, gauge1, scenario)
    dev = {"kernel_mean": float(np.max(np.abs(k1.mean - k0.mean))),
           "kernel_covariance": float(np.max(np.abs(k1.covariance - k0.covariance)))}
    changed = {"phi_gradient": float(np.max(np.abs(k1.phi_gradient - k0.phi_gradient))),
               "A": float(np.max(np.abs(k1.gauge_value - k0.gauge_value)))}
    return InvarianceReport("kernel", dev, changed)


def _kinetic_momentum(model, state):
    fr = model.frame(state.rho, with_quantum=False)
    v = model.velocity(model.extend_phase(model.periodic_part(state), fr, state.t), state.winding, state.t)
    return np.array([state.grid.integrate(state.rho * m * va) for m, va in zip(model.scenario.axis_masses, v)])


def _fields_report(scenario, chi, gauge, n_steps, state):
    from .fields import FieldIntegrator, FieldModel, ensemble_hamiltonian, initial_state

    base = _base_gauge(gauge, scenario)
    s0 = state if state is not None else initial_state(scenario)
    s1, gauge1 = transform(s0, base, chi, scenario)
    m0, m1 = FieldModel(scenario, base), FieldModel(scenario, gauge1)
    i0, i1 = FieldIntegrator(m0), FieldIntegrator(m1)
    dev = {"rho": 0.0, "hamiltonian": 0.0, "kinetic_momentum": 0.0}
    changed = {"Phi": float(np.max(np.abs(s1.Phi - s0.Phi))),
               "A": float(np.max(np.abs(m1.vector_potential(0.0) - m0.vector_potential(0.0))))}
    a, b = s0, s1
    for n in range(n_steps + 1):
        if n:
            a, b = i0.step(a), i1.step(b)
        dev["rho"] = max(dev["rho"], float(np.max(np.abs(a.rho - b.rho))))
        if n % 50 == 0 or n == n_steps:
            h0 = ensemble_hamiltonian(a, scenario, model=m0).total
            h1 = ensemble_hamiltonian(b, scenario, model=m1).total
            dev["hamiltonian"] = max(dev["hamiltonian"], abs(h1 - h0))
            dev["kinetic_momentum"] = max(dev["kinetic_momentum"],
                                          float(np.max(np.abs(_kinetic_momentum(m0, a) - _kinetic_momentum(m1, b)))))
    return InvarianceReport("fields", dev, changed, n_steps)


def _wave_report(scenario, chi, gauge, n_steps, state):
    from .fields import initial_state
    from .wave import RegraduationConstants, SchrodingerSolver, to_wave

    base = _base_gauge(gauge, scenario)
    s0 = state if state is not None else initial_state(scenario)
    w0 = to_wave(s0, RegraduationConstants.from_scenario(scenario))
    w1, gauge1 = transform(w0, base, chi, scenario)
    solve0 = SchrodingerSolver(scenario, base, method="split")
    solve1 = SchrodingerSolver(scenario, gauge1, method="split")
    dev = {"density": 0.0}
    changed = {"psi": float(np.max(np.abs(w1.psi - w0.psi)))}
    a, b = w0, w1
    for n in range(1, n_steps + 1):
        a, b = solve0.step(a), solve1.step(b)
        dev["density"] = max(dev["density"], float(np.max(np.abs(a.density - b.density))))
    return InvarianceReport("wave", dev, changed, n_steps)


def invariance_report(scenario, chi: GaugeFunction, pipeline: str = "kernel", gauge: GaugeField | None = None,
                      n_steps: int = 1000, phi: DriftPotential | None = None, points=None,
                      state=None) -> InvarianceReport:
    """Run a pipeline with and without the gauge transformation and compare invariant observables.

    ``pipeline`` is ``"kernel"``, ``"fields"`` or ``"wave"``.  ``gauge``
    defaults to the scenario's vector potential.
    """
    if gauge is None:
        gauge = GaugeField.from_scenario(scenario)
    if pipeline == "kernel":
        return _kernel_report(scenario, chi, gauge, phi, points)
    if pipeline == "fields":
        return _fields_report(scenario, chi, gauge, n_steps, state)
    if pipeline == "wave":
        return _wave_report(scenario, chi, gauge, n_steps, state)
    raise ValueError(f"unknown pipeline {pipeline!r}")
