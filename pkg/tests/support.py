"""Shared scenario builders for the test suite."""
from __future__ import annotations

import numpy as np

from entropic_dynamics.potentials import Free, Harmonic
from entropic_dynamics.space import GridSpec, Scenario
from entropic_dynamics.states import CoherentState, GaussianState, GroundState


def line(lower=-20.0, upper=20.0, points=512) -> GridSpec:
    return GridSpec.uniform(lower, upper, points)


def free_packet(points=512, length=40.0, dt=1e-3, t_final=2.0, **kw) -> Scenario:
    """sigma0 = m = hbar = 1 Gaussian on a periodic line."""
    kw.setdefault("initial", GaussianState(0.0, 1.0, 0.0))
    return Scenario(grid=line(-length / 2, length / 2, points), dt=dt, t_final=t_final, potential=Free(), **kw)


def oscillator(points=256, length=20.0, dt=4e-3, t_final=1.0, initial=None, **kw) -> Scenario:
    return Scenario(grid=line(-length / 2, length / 2, points), dt=dt, t_final=t_final,
                    potential=Harmonic(1.0), initial=initial or GroundState(1.0), **kw)


def coherent(shift=1.0, **kw) -> Scenario:
    return oscillator(initial=CoherentState(1.0, shift, 0.0), **kw)


def gaussian_density(x, sigma=1.0, centre=0.0):
    return np.exp(-((x - centre) ** 2) / (2 * sigma**2)) / np.sqrt(2 * np.pi * sigma**2)
