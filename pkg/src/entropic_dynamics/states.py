"""Initial conditions and closed-form reference solutions.

Initial-state objects produce ``(rho, Phi, winding)`` on a grid.  ``Phi``
is sampled from a continuous function on the real line, so on a periodic
grid it may jump across the seam; ``winding[a]`` records that jump,
Phi(x + L_a e_a) - Phi(x).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _axis_values(value, n: int) -> np.ndarray:
    return np.broadcast_to(np.atleast_1d(np.asarray(value, dtype=float)), (n,)).copy()


def _normalize(rho: np.ndarray, grid) -> np.ndarray:
    return rho / (np.sum(rho) * grid.cell_volume)


def _linear_phase(grid, momentum: np.ndarray, center: np.ndarray, periodic: bool):
    mesh = grid.mesh()
    phi = sum(p * (x - c) for p, x, c in zip(momentum, mesh, center))
    winding = tuple(float(p * L) if periodic else 0.0 for p, L in zip(momentum, grid.lengths))
    return np.asarray(phi, dtype=float) * np.ones(grid.shape), winding


class InitialState:
    def fields(self, grid, scenario):
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianState(InitialState):
    """Product Gaussian with a plane-wave phase; scalars broadcast over axes."""

    center: tuple = (0.0,)
    sigma: tuple = (1.0,)
    momentum: tuple = (0.0,)

    def fields(self, grid, scenario):
        D = grid.ndim
        c = _axis_values(self.center, D)
        s = _axis_values(self.sigma, D)
        p = _axis_values(self.momentum, D)
        mesh = grid.mesh()
        log_rho = sum(-((x - ci) ** 2) / (2 * si**2) for x, ci, si in zip(mesh, c, s))
        rho = _normalize(np.exp(log_rho), grid)
        phi, winding = _linear_phase(grid, p, c, scenario.periodic)
        return rho, phi, winding


@dataclass(frozen=True)
class GroundState(InitialState):
    """Oscillator ground state, width sigma^2 = hbar / (2 m omega) per axis."""

    omega: float = 1.0
    center: float = 0.0

    def sigma(self, scenario) -> np.ndarray:
        return np.sqrt(scenario.hbar / (2 * scenario.axis_masses * self.omega))

    def fields(self, grid, scenario):
        return GaussianState(self.center, tuple(self.sigma(scenario)), 0.0).fields(grid, scenario)


@dataclass(frozen=True)
class CoherentState(InitialState):
    """Displaced oscillator ground state with a momentum kick."""

    omega: float = 1.0
    shift: tuple = (1.0,)
    momentum: tuple = (0.0,)

    def fields(self, grid, scenario):
        sigma = GroundState(self.omega).sigma(scenario)
        return GaussianState(self.shift, tuple(sigma), self.momentum).fields(grid, scenario)


@dataclass(frozen=True)
class UniformState(InitialState):
    momentum: tuple = (0.0,)

    def fields(self, grid, scenario):
        rho = np.full(grid.shape, 1.0 / np.prod(grid.lengths))
        p = _axis_values(self.momentum, grid.ndim)
        phi, winding = _linear_phase(grid, p, np.asarray(grid.lower), scenario.periodic)
        return rho, phi, winding


@dataclass(frozen=True)
class ExcitedState(InitialState):
    """First excited oscillator state along the first axis; has a node at the centre."""

    omega: float = 1.0

    def fields(self, grid, scenario):
        sigma = GroundState(self.omega).sigma(scenario)
        mesh = grid.mesh()
        log_rho = sum(-(x**2) / (2 * s**2) for x, s in zip(mesh, sigma))
        rho = _normalize(mesh[0] ** 2 * np.exp(log_rho), grid)
        return rho, np.zeros(grid.shape), (0.0,) * grid.ndim


@dataclass(frozen=True)
class BimodalState(InitialState):
    """Equal mixture of two Gaussians separated along the first axis."""

    separation: float = 3.0
    sigma: float = 0.5
    center: float = 0.0

    def fields(self, grid, scenario):
        mesh = grid.mesh()
        rest = sum(-(x**2) / (2 * self.sigma**2) for x in mesh[1:]) if grid.ndim > 1 else 0.0
        bumps = sum(np.exp(-((mesh[0] - self.center - s * self.separation / 2) ** 2)
                           / (2 * self.sigma**2)) for s in (-1, 1))
        rho = _normalize(bumps * np.exp(rest), grid)
        return rho, np.zeros(grid.shape), (0.0,) * grid.ndim


# --- closed-form solutions -------------------------------------------------


def free_packet_variance(t, sigma0: float = 1.0, m: float = 1.0, hbar: float = 1.0):
    """sigma^2(t) = sigma0^2 + (hbar t / (2 m sigma0))^2."""
    t = np.asarray(t, dtype=float)
    return sigma0**2 + (hbar * t / (2 * m * sigma0)) ** 2


def free_packet(x, t: float, sigma0: float = 1.0, x0: float = 0.0, p0: float = 0.0,
                m: float = 1.0, hbar: float = 1.0):
    """Density and phase of a spreading free Gaussian packet in one dimension."""
    x = np.asarray(x, dtype=float)
    tau = hbar * t / (2 * m * sigma0**2)
    var = sigma0**2 * (1 + tau**2)
    u = x - x0 - p0 * t / m
    rho = np.exp(-(u**2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    phase = (u**2 * tau / (4 * sigma0**2 * (1 + tau**2)) - 0.5 * np.arctan(tau)
             + p0 * (x - x0) / hbar - p0**2 * t / (2 * m * hbar))
    return rho, hbar * phase


def coherent_state(x, t: float, omega: float = 1.0, x0: float = 1.0, p0: float = 0.0,
                   m: float = 1.0, hbar: float = 1.0):
    """Density and phase of an oscillator coherent state, Phi(x, 0) = p0 (x - x0)."""
    x = np.asarray(x, dtype=float)
    var = hbar / (2 * m * omega)
    c, s = np.cos(omega * t), np.sin(omega * t)
    xc = x0 * c + p0 / (m * omega) * s
    pc = p0 * c - m * omega * x0 * s
    rho = np.exp(-((x - xc) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    phi = pc * x - 0.5 * (pc * xc - p0 * x0) - p0 * x0 - 0.5 * hbar * omega * t
    return rho, phi


def coherent_energy(omega: float, x0: float, p0: float, m: float = 1.0, hbar: float = 1.0) -> float:
    return 0.5 * hbar * omega + 0.5 * m * omega**2 * x0**2 + p0**2 / (2 * m)
