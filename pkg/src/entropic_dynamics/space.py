"""Configuration space, grids, and the metric objects built on them.

Configuration-space axes are ordered particle-major: axis ``A = n * d + a``
is spatial component ``a`` of particle ``n``.  Every per-axis array in the
package (masses, spacings, drifts) follows this order.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError

BOUNDARIES = ("periodic", "reflecting", "open")
MAX_GRID_DIM = 2


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-based grid on ``[lower, upper)`` per axis.

    Nodes sit at ``lower + i * spacing`` for ``i = 0..points-1`` so that the
    periodic image of ``upper`` is node 0.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        pts = tuple(int(v) for v in np.atleast_1d(self.points))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "points", pts)
        if not (len(lo) == len(hi) == len(pts)):
            raise ConfigError("grid: lower, upper and points must have one entry per axis")
        for a, (l, u, n) in enumerate(zip(lo, hi, pts)):
            if not u > l:
                raise ConfigError(f"grid axis {a}: upper bound {u} must exceed lower bound {l}")
            if n < 16:
                raise ConfigError(f"grid axis {a}: need at least 16 points, got {n}")
            if not _is_power_of_two(n):
                raise ConfigError(f"grid axis {a}: points must be a power of two, got {n}")

    @classmethod
    def uniform(cls, lower: float, upper: float, points: int, ndim: int = 1) -> "GridSpec":
        return cls((lower,) * ndim, (upper,) * ndim, (points,) * ndim)

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, a: int) -> np.ndarray:
        return self.lower[a] + self.spacing[a] * np.arange(self.points[a])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.ndim)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points_array(self) -> np.ndarray:
        """Grid nodes as an array of shape ``shape + (ndim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)

    def coarsen(self, factor: int) -> "GridSpec":
        return GridSpec(self.lower, self.upper, tuple(n // factor for n in self.points))

    def with_points(self, points: int | Sequence[int]) -> "GridSpec":
        pts = tuple(np.broadcast_to(np.atleast_1d(points), (self.ndim,)).tolist())
        return GridSpec(self.lower, self.upper, pts)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower)
        L = np.asarray(self.lengths)
        return lo + np.mod(x - lo, L)

    def describe(self) -> str:
        return " ".join(f"{l:g}:{u:g}:{n}" for l, u, n in zip(self.lower, self.upper, self.points))


@dataclass(frozen=True)
class Scenario:
    """Complete problem statement shared by every pipeline.

    ``hbar`` is derived from ``xi`` and never set directly.  Potentials and
    initial states are the dataclasses from :mod:`entropic_dynamics.potentials`
    and :mod:`entropic_dynamics.states`.
    """

    masses: tuple[float, ...] = (1.0,)
    n_particles: int = 1
    spatial_dim: int = 1
    eta: float = 1.0
    xi: float = 0.125
    dt: float = 1e-3
    dt_field: float | None = None
    grid: GridSpec | None = None
    potential: Any = None
    vector_potential: Any = None
    charges: tuple[float, ...] | None = None
    boundary: str = "periodic"
    t_final: float = 1.0
    initial: Any = None
    seed: int = 0
    walkers: int = 10_000
    stencil_order: int = 8
    escape_cutoff: float | None = None
    name: str = "scenario"

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        object.__setattr__(self, "masses", masses)
        if self.charges is None:
            object.__setattr__(self, "charges", (1.0,) * len(masses))
        else:
            object.__setattr__(self, "charges", tuple(float(c) for c in np.atleast_1d(self.charges)))
        if self.potential is None:
            from .potentials import Free

            object.__setattr__(self, "potential", Free())
        if self.dt_field is None:
            object.__setattr__(self, "dt_field", float(self.dt))
        self.validate()

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ConfigError("particles must be a positive integer")
        if self.spatial_dim not in (1, 2, 3):
            raise ConfigError(f"spatial dimension must be 1, 2 or 3, got {self.spatial_dim}")
        if len(self.masses) != self.n_particles:
            raise ConfigError(f"expected {self.n_particles} masses, got {len(self.masses)}")
        if any(not m > 0 for m in self.masses):
            raise ConfigError("all masses must be positive")
        if len(self.charges) != self.n_particles:
            raise ConfigError(f"expected {self.n_particles} charges, got {len(self.charges)}")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not self.xi >= 0:
            raise ConfigError("xi must be non-negative")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.dt_field > 0:
            raise ConfigError("dt_field must be positive")
        if self.t_final < 0:
            raise ConfigError("t_final must be non-negative")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {', '.join(BOUNDARIES)}, got {self.boundary!r}")
        if self.stencil_order % 2 or self.stencil_order < 2:
            raise ConfigError("stencil_order must be an even integer >= 2")
        if self.grid is not None and self.grid.ndim != self.config_dim:
            raise ConfigError(
                f"grid has {self.grid.ndim} axes but configuration space has {self.config_dim}")
        if self.walkers < 1:
            raise ConfigError("walkers must be positive")

    @property
    def config_dim(self) -> int:
        return self.n_particles * self.spatial_dim

    @property
    def hbar(self) -> float:
        return float(np.sqrt(8.0 * self.xi))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def axis_masses(self) -> np.ndarray:
        return np.repeat(np.asarray(self.masses), self.spatial_dim)

    @property
    def axis_charges(self) -> np.ndarray:
        return np.repeat(np.asarray(self.charges), self.spatial_dim)

    @property
    def alpha(self) -> np.ndarray:
        """Per-particle kernel precision m_n / (eta dt)."""
        return np.asarray(self.masses) / (self.eta * self.dt)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def n_field_steps(self) -> int:
        return int(round(self.t_final / self.dt_field))

    def require_grid(self) -> GridSpec:
        if self.grid is None:
            raise ConfigError("this operation needs a grid")
        if self.config_dim > MAX_GRID_DIM:
            raise ConfigError(
                f"grid solvers support configuration-space dimension <= {MAX_GRID_DIM}, "
                f"got {self.config_dim}")
        return self.grid

    def particle_slices(self) -> list[slice]:
        d = self.spatial_dim
        return [slice(n * d, (n + 1) * d) for n in range(self.n_particles)]

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def potential_at(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.potential.evaluate(np.asarray(x, dtype=float), t, self)


@dataclass(frozen=True)
class MassTensor:
    """Diagonal mass tensor m_AB = m_n delta_AB and its inverse."""

    diagonal: np.ndarray
    inverse_diagonal: np.ndarray
    total_mass: float

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def inverse_matrix(self) -> np.ndarray:
        return np.diag(self.inverse_diagonal)


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint values recovered from the multipliers (bookkeeping only)."""

    kappa_n: np.ndarray
    kappa_prime: float = 0.0
    kappa_doubleprime_n: np.ndarray = field(default_factory=lambda: np.zeros(0))


def build_mass_tensors(scenario: Scenario) -> MassTensor:
    diag = scenario.axis_masses.astype(float)
    return MassTensor(diagonal=diag, inverse_diagonal=1.0 / diag,
                      total_mass=float(np.sum(scenario.masses)))


def info_metric(scenario: Scenario, C: float | None = None) -> np.ndarray:
    """Closed-form information metric gamma_AB = C m_n delta_AB / (eta dt).

    With the default ``C = eta * dt`` the metric equals the mass tensor.
    """
    if C is None:
        C = scenario.eta * scenario.dt
    if not C > 0:
        raise ValueError("metric scale C must be positive")
    gamma = C * scenario.axis_masses / (scenario.eta * scenario.dt)
    mass = build_mass_tensors(scenario)
    if not np.allclose(mass.diagonal, scenario.eta * scenario.dt / C * gamma, rtol=1e-14, atol=0):
        raise ArithmeticError("metric and mass tensor disagree")
    return np.diag(gamma)


def log_partition(alpha: float, g: np.ndarray | float, d: int) -> float:
    """log of int exp(-alpha |u|^2 / 2 + g . u) du over R^d."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    g = np.broadcast_to(np.atleast_1d(np.asarray(g, dtype=float)), (d,))
    return 0.5 * d * np.log(2 * np.pi / alpha) + float(g @ g) / (2 * alpha)


def log_partition_quadrature(alpha: float, g: np.ndarray | float, d: int, order: int = 80) -> float:
    """Same integral by Gauss-Hermite quadrature, one factor per dimension."""
    g = np.broadcast_to(np.atleast_1d(np.asarray(g, dtype=float)), (d,))
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    total = 0.0
    for ga in g:
        # substitute u = sqrt(2/alpha) y; the Gaussian weight exp(-y^2) is built in
        scale = np.sqrt(2.0 / alpha)
        total += np.log(scale * np.sum(weights * np.exp(ga * scale * nodes)))
    return total


def kappa_from_alpha(alpha_n, kernel) -> ConstraintSpec:
    """Expected squared displacement per particle, kappa_n = -2 d log zeta / d alpha_n.

    Differentiating at fixed drift multiplier gives d/alpha_n + |<dx_n>|^2.
    """
    alpha_n = np.atleast_1d(np.asarray(alpha_n, dtype=float))
    if np.any(alpha_n <= 0):
        raise ValueError("multipliers alpha_n must be positive")
    d = kernel.spatial_dim
    mean = np.asarray(kernel.mean).reshape(len(alpha_n), d)
    kappa = d / alpha_n + np.sum(mean**2, axis=1)
    grad = np.asarray(getattr(kernel, "phi_gradient", np.zeros_like(kernel.mean)))
    gauge = np.asarray(getattr(kernel, "gauge_value", np.zeros_like(kernel.mean)))
    kappa_prime = float(np.asarray(kernel.mean) @ grad)
    kpp = np.sum((np.asarray(kernel.mean) * gauge).reshape(len(alpha_n), d), axis=1)
    return ConstraintSpec(kappa_n=kappa, kappa_prime=kappa_prime, kappa_doubleprime_n=kpp)
