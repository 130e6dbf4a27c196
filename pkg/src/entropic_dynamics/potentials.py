"""Built-in scalar and vector potentials.

Scalar potentials act on configuration-space points ``x`` of shape
``(..., N*d)`` and are sums of one-particle terms.  Vector potentials are
per-particle spatial covectors A_a(x_n, t); the configuration-space lift
(with the eta and charge factors) lives in :mod:`entropic_dynamics.kernel`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _particles(x: np.ndarray, scenario) -> list[np.ndarray]:
    return [x[..., s] for s in scenario.particle_slices()]


class ScalarPotential:
    time_dependent = False

    def evaluate(self, x: np.ndarray, t: float, scenario) -> np.ndarray:
        raise NotImplementedError

    def time_derivative(self, x: np.ndarray, t: float, scenario) -> np.ndarray:
        return np.zeros(x.shape[:-1])

    def __add__(self, other: "ScalarPotential") -> "ScalarPotential":
        return SumPotential(_terms(self) + _terms(other))


def _terms(p) -> tuple:
    return p.terms if isinstance(p, SumPotential) else (p,)


@dataclass(frozen=True)
class Free(ScalarPotential):
    def evaluate(self, x, t, scenario):
        return np.zeros(x.shape[:-1])


@dataclass(frozen=True)
class Harmonic(ScalarPotential):
    """Isotropic oscillator 1/2 m_n omega^2 |x_n - center|^2 for every particle."""

    omega: float = 1.0
    center: float = 0.0

    def evaluate(self, x, t, scenario):
        out = np.zeros(x.shape[:-1])
        for m, xn in zip(scenario.masses, _particles(x, scenario)):
            out += 0.5 * m * self.omega**2 * np.sum((xn - self.center) ** 2, axis=-1)
        return out


@dataclass(frozen=True)
class Barrier(ScalarPotential):
    """Gaussian bump of the given height along the first spatial axis."""

    height: float = 1.0
    width: float = 0.5
    center: float = 0.0

    def evaluate(self, x, t, scenario):
        out = np.zeros(x.shape[:-1])
        for xn in _particles(x, scenario):
            out += self.height * np.exp(-((xn[..., 0] - self.center) ** 2) / (2 * self.width**2))
        return out


@dataclass(frozen=True)
class Driven(ScalarPotential):
    """Uniform oscillating force: V = field * x * sin(freq * t) along the first axis."""

    field: float = 1.0
    freq: float = 1.0
    time_dependent = True

    def evaluate(self, x, t, scenario):
        s = np.sin(self.freq * t)
        return sum(self.field * xn[..., 0] * s for xn in _particles(x, scenario))

    def time_derivative(self, x, t, scenario):
        c = self.freq * np.cos(self.freq * t)
        return sum(self.field * xn[..., 0] * c for xn in _particles(x, scenario))


@dataclass(frozen=True)
class SumPotential(ScalarPotential):
    terms: tuple = ()

    @property
    def time_dependent(self):
        return any(t.time_dependent for t in self.terms)

    def evaluate(self, x, t, scenario):
        out = np.zeros(x.shape[:-1])
        for term in self.terms:
            out = out + term.evaluate(x, t, scenario)
        return out

    def time_derivative(self, x, t, scenario):
        out = np.zeros(x.shape[:-1])
        for term in self.terms:
            out = out + term.time_derivative(x, t, scenario)
        return out


class VectorPotential:
    """Spatial covector field A_a(y, t) for one particle at points ``y`` of shape (..., d)."""

    time_dependent = False

    def spatial(self, y: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def time_derivative(self, y: np.ndarray, t: float) -> np.ndarray:
        return np.zeros_like(y, dtype=float)


def _component_vector(value, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1:
        out = np.zeros(d)
        out[0] = v[0]
        return out
    if v.size != d:
        raise ValueError(f"vector potential needs {d} components, got {v.size}")
    return v


@dataclass(frozen=True)
class UniformA(VectorPotential):
    """Constant A; a scalar value points along the first axis."""

    value: tuple = (1.0,)

    def spatial(self, y, t):
        return np.broadcast_to(_component_vector(self.value, y.shape[-1]), y.shape).copy()


@dataclass(frozen=True)
class UniformB(VectorPotential):
    """Uniform field of the given strength normal to the first two axes, Landau gauge A = (-B y, 0)."""

    strength: float = 1.0

    def spatial(self, y, t):
        if y.shape[-1] < 2:
            raise ValueError("uniform_B needs at least two spatial dimensions")
        out = np.zeros_like(y, dtype=float)
        out[..., 0] = -self.strength * y[..., 1]
        return out


@dataclass(frozen=True)
class RampA(VectorPotential):
    """Uniform A along the first axis growing linearly in time: value + rate * t."""

    value: float = 0.0
    rate: float = 1.0
    time_dependent = True

    def spatial(self, y, t):
        out = np.zeros_like(y, dtype=float)
        out[..., 0] = self.value + self.rate * t
        return out

    def time_derivative(self, y, t):
        out = np.zeros_like(y, dtype=float)
        out[..., 0] = self.rate
        return out


@dataclass(frozen=True)
class SumVectorPotential(VectorPotential):
    terms: tuple = ()

    @property
    def time_dependent(self):
        return any(t.time_dependent for t in self.terms)

    def spatial(self, y, t):
        return sum(term.spatial(y, t) for term in self.terms)

    def time_derivative(self, y, t):
        return sum(term.time_derivative(y, t) for term in self.terms)
