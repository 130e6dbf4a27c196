"""Reference Schrodinger solvers and the Madelung maps.

The complex field ``Psi_k = rho^(1/2) exp(i k Phi / eta)`` obeys a
Schrodinger-like equation with a nonlinear amplitude term whose
coefficient ``eta^2 / (2 k^2) - 4 xi`` vanishes at the regraduation value
``k_hat = (eta^2 / (8 xi))^(1/2)``.  There ``eta / k_hat = hbar`` and the
equation is linear.

Two linear solvers are provided.  Without a vector potential the default
is Crank-Nicolson on the same high-order stencil Laplacian as the field
solver, factorized once with a sparse LU.  With a vector potential the
solver is a Strang split-step spectral scheme in which each axis'
kinetic factor is conjugated by the phase ``exp(i G_a / hbar)`` with
``d_a G_a = A_a - mean_a(A_a)``, which applies minimal coupling exactly
along every grid line.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NodeError
from .extension import interior_holes, support_mask
from .fields import REL_FLOOR, FieldState
from .kernel import GaugeField
from .stencils import Differentiator, central_offsets, fd_weights

PLAQUETTE_TOLERANCE = 1e-6
JUMP_LIMIT = 0.9 * np.pi


@dataclass(frozen=True)
class RegraduationConstants:
    eta: float
    xi: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.xi > 0:
            raise ValueError("regraduation needs xi > 0")

    @classmethod
    def from_scenario(cls, scenario) -> "RegraduationConstants":
        return cls(scenario.eta, scenario.xi)

    @property
    def k_hat(self) -> float:
        return float(np.sqrt(self.eta**2 / (8.0 * self.xi)))

    @property
    def hbar(self) -> float:
        return float(np.sqrt(8.0 * self.xi))

    def hbar_k(self, k: float | None = None) -> float:
        """eta / k, the constant that plays the role of hbar for Psi_k."""
        return self.hbar if k is None else self.eta / k

    def coefficient(self, k: float) -> float:
        """eta^2/(2 k^2) - 4 xi, written so that it is exactly zero at k_hat."""
        return 4.0 * self.xi * ((self.k_hat / k) ** 2 - 1.0)


@dataclass(frozen=True)
class WaveState:
    grid: object
    psi: np.ndarray
    t: float = 0.0
    k: float | None = None

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != self.grid.shape:
            raise ValueError(f"psi must have grid shape {self.grid.shape}")
        object.__setattr__(self, "psi", psi)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return self.grid.integrate(self.density)


def to_wave(state: FieldState, constants: RegraduationConstants, k: float | None = None) -> WaveState:
    """Psi_k = rho^(1/2) exp(i k Phi / eta); ``k`` defaults to k_hat."""
    hk = constants.hbar_k(k)
    psi = np.sqrt(state.rho) * np.exp(1j * state.Phi / hk)
    return WaveState(state.grid, psi, state.t, k)


def _node_location(grid, index) -> tuple:
    return tuple(float(ax[i]) for ax, i in zip(grid.axes(), index))


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _unwrap_line(theta: np.ndarray, start: int) -> np.ndarray:
    out = np.empty_like(theta)
    out[start:] = np.unwrap(theta[start:])
    out[: start + 1] = np.unwrap(theta[: start + 1][::-1])[::-1]
    return out


def _check_jumps(theta, known, grid, periodic):
    for a in range(grid.ndim):
        diff = np.abs(_wrap(np.roll(theta, -1, axis=a) - theta))
        both = known & np.roll(known, -1, axis=a)
        if not periodic:
            idx = [slice(None)] * grid.ndim
            idx[a] = -1
            both[tuple(idx)] = False
        bad = np.argwhere(both & (diff > JUMP_LIMIT))
        if len(bad):
            loc = _node_location(grid, bad[0])
            raise NodeError(f"phase jumps by more than 0.9 pi between neighbours near x = {loc}; "
                            "the wave function has a node", location=loc)


def from_wave(wave: WaveState, constants: RegraduationConstants, periodic: bool = True) -> FieldState:
    """rho = |Psi|^2 and Phi = (eta/k) times the unwrapped phase.

    The phase is unwrapped along grid lines from the first supported cell
    (a spanning tree in two dimensions, checked on every supported
    plaquette).  Nodes inside the support raise :class:`NodeError`.
    """
    grid = wave.grid
    hk = constants.hbar_k(wave.k)
    rho = wave.density
    known, _ = support_mask(rho, REL_FLOOR, periodic, 1)
    holes = interior_holes(known, periodic)
    if holes:
        loc = _node_location(grid, holes[0])
        raise NodeError(f"wave function has a node near x = {loc}", location=loc)
    theta = np.angle(wave.psi)
    _check_jumps(theta, known, grid, periodic)
    ref = tuple(int(i) for i in np.argwhere(known)[0])
    if grid.ndim == 1:
        phase = _unwrap_line(theta, ref[0])
    elif grid.ndim == 2:
        row = _unwrap_line(theta[ref[0], :], ref[1])
        phase = np.empty_like(theta)
        for j in range(theta.shape[1]):
            col = theta[:, j].copy()
            col[ref[0]] = row[j]
            phase[:, j] = _unwrap_line(col, ref[0])
        _check_plaquettes(theta, known, grid, periodic)
    else:
        raise ValueError("phase unwrapping supports at most two grid axes")
    winding = []
    for a in range(grid.ndim):
        if periodic:
            first = np.take(phase, 0, axis=a)
            last = np.take(phase, -1, axis=a)
            jump = last + _wrap(first - last) - first
            w = 2 * np.pi * np.round(np.median(jump) / (2 * np.pi))
            winding.append(hk * w)
        else:
            winding.append(0.0)
    return FieldState(grid, rho, hk * phase, wave.t, tuple(winding))


def _check_plaquettes(theta, known, grid, periodic):
    def d(a, f):
        return _wrap(np.roll(f, -1, axis=a) - f)

    circ = d(0, theta) + np.roll(d(1, theta), -1, axis=0) - np.roll(d(0, theta), -1, axis=1) - d(1, theta)
    corners = known & np.roll(known, -1, 0) & np.roll(known, -1, 1) & np.roll(np.roll(known, -1, 0), -1, 1)
    if not periodic:
        corners[-1, :] = False
        corners[:, -1] = False
    bad = np.argwhere(corners & (np.abs(circ) > PLAQUETTE_TOLERANCE))
    if len(bad):
        loc = _node_location(grid, bad[0])
        raise NodeError(f"phase circulates around the plaquette at x = {loc}; "
                        "the phase is multivalued", location=loc)


# --- linear solvers --------------------------------------------------------------


def _laplacian_1d(n: int, h: float, order: int, periodic: bool) -> sp.csr_matrix:
    """Symmetric stencil second derivative; non-periodic grids see zero outside."""
    offsets = central_offsets(2, order)
    w = fd_weights(2, offsets) / h**2
    diags, offs = [], []
    for j, wj in zip(offsets, w):
        diags.append(np.full(n, wj))
        offs.append(j)
        if periodic and j != 0:
            diags.append(np.full(n, wj))
            offs.append(j - n if j > 0 else j + n)
    return sp.diags(diags, offs, shape=(n, n), format="csr")


def _fft_integrate(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Periodic antiderivative of a zero-mean field along ``axis``."""
    n = f.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    shape = [1] * f.ndim
    shape[axis] = -1
    k = k.reshape(shape)
    spec = np.fft.fft(f, axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        spec = np.where(k == 0, 0.0, spec / (1j * k))
    return np.real(np.fft.ifft(spec, axis=axis))


class SchrodingerSolver:
    """Linear Schrodinger stepper for one scenario.

    Parameters
    ----------
    method : {"auto", "cn", "split"}
        ``auto`` picks Crank-Nicolson without a vector potential and the
        gauge split-step otherwise.
    """

    def __init__(self, scenario, gauge: GaugeField | None = None, method: str = "auto", warn: bool = True):
        self.scenario = scenario
        self.grid = grid = scenario.require_grid()
        self.gauge = gauge if gauge is not None else GaugeField.from_scenario(scenario)
        has_A = self.gauge is not None and (self.gauge.potential is not None or self.gauge.shifts)
        if method == "auto":
            method = "split" if has_A else "cn"
        if method not in ("cn", "split"):
            raise ValueError(f"unknown method {method!r}")
        if method == "cn" and has_A:
            raise ValueError("Crank-Nicolson path does not take a vector potential; use method='split'")
        if method == "split" and not scenario.periodic:
            raise ValueError("the split-step solver needs a periodic grid")
        self.method = method
        self.hbar = scenario.hbar
        self.masses = scenario.axis_masses
        self.points = grid.points_array()
        self.warn = warn
        self._lu = None
        self._lu_key = None
        self._checked_dt = set()
        if method == "cn":
            n = grid.size
            lap = sp.csr_matrix((n, n))
            for a in range(grid.ndim):
                op = _laplacian_1d(grid.points[a], grid.spacing[a], scenario.stencil_order, scenario.periodic)
                mats = [sp.identity(p, format="csr") for p in grid.points]
                mats[a] = op
                full = mats[0]
                for mtx in mats[1:]:
                    full = sp.kron(full, mtx, format="csr")
                lap = lap + full / self.masses[a]
            self.kinetic = (-0.5 * self.hbar**2 * lap).tocsc()
        self.kvec = [2 * np.pi * np.fft.fftfreq(p, d=h) for p, h in zip(grid.points, grid.spacing)]

    def _V(self, t: float) -> np.ndarray:
        return self.scenario.potential_at(self.points, t)

    def check_step(self, h: float) -> None:
        if not self.warn or h in self._checked_dt:
            return
        self._checked_dt.add(h)
        if self.method == "cn":
            offsets = central_offsets(2, self.scenario.stencil_order)
            w = fd_weights(2, offsets)
            nyquist = -float(sum(wj * np.cos(j * np.pi) for j, wj in zip(offsets, w)))
            k2 = np.array([nyquist / s**2 for s in self.grid.spacing])
        else:
            k2 = np.array([(np.pi / s) ** 2 for s in self.grid.spacing])
        emax = float(np.sum(0.5 * self.hbar**2 * k2 / self.masses))
        emax += float(np.max(np.abs(self._V(0.0))))
        # the Cayley map saturates at a phase of pi; the exact exponential aliases at 2 pi
        limit = np.pi if self.method == "cn" else 2 * np.pi
        if h * emax / self.hbar > limit:
            suggested = limit * self.hbar / emax
            warnings.warn(f"time step {h:g} resolves no phase per step at the grid cutoff; "
                          f"use dt <= {suggested:.3g}", RuntimeWarning, stacklevel=3)

    def step(self, wave: WaveState, h: float | None = None) -> WaveState:
        if h is None:
            h = self.scenario.dt_field
        self.check_step(h)
        if self.method == "cn":
            psi = self._cn(wave.psi, h, wave.t)
        else:
            psi = self._split(wave.psi, h, wave.t)
        return replace(wave, psi=psi, t=wave.t + h)

    def _cn(self, psi, h, t):
        V = self._V(t + 0.5 * h)
        key = (h, V.tobytes() if self.scenario.potential.time_dependent else None)
        if self._lu is None or key != self._lu_key:
            H = self.kinetic + sp.diags(V.ravel(), format="csc")
            c = 0.5j * h / self.hbar
            n = self.grid.size
            self._lu = spla.splu((sp.identity(n, format="csc") + c * H).tocsc())
            self._rhs = (sp.identity(n, format="csr") - c * H).tocsr()
            self._lu_key = key
        out = self._lu.solve(self._rhs @ psi.ravel())
        return out.reshape(psi.shape)

    def _axis_factors(self, t: float):
        """Per axis: (conjugating phase exp(iG/hbar), kinetic symbol for a full step of unit length)."""
        A = self.gauge.lifted(self.points, t) if self.gauge is not None else np.zeros(self.points.shape)
        out = []
        for a in range(self.grid.ndim):
            Aa = A[..., a]
            mean = np.mean(Aa, axis=a, keepdims=True)
            G = _fft_integrate(Aa - mean, a, self.grid.spacing[a])
            shape = [1] * self.grid.ndim
            shape[a] = -1
            p = self.hbar * self.kvec[a].reshape(shape)
            out.append((np.exp(1j * G / self.hbar), (p - mean) ** 2 / (2 * self.masses[a])))
        return out

    def _split(self, psi, h, t):
        tm = t + 0.5 * h
        half_V = np.exp(-0.5j * h * self._V(tm) / self.hbar)
        factors = self._axis_factors(tm)
        psi = half_V * psi
        order = list(range(self.grid.ndim))
        seq = [(a, 0.5) for a in order[:-1]] + [(order[-1], 1.0)] + [(a, 0.5) for a in reversed(order[:-1])]
        for a, frac in seq:
            phase, energy = factors[a]
            f = np.fft.fft(np.conj(phase) * psi, axis=a)
            f *= np.exp(-1j * frac * h * energy / self.hbar)
            psi = phase * np.fft.ifft(f, axis=a)
        return half_V * psi

    def evolve(self, wave: WaveState, n_steps: int, h: float | None = None, every: int = 0) -> list[WaveState]:
        out = [wave]
        for n in range(1, n_steps + 1):
            wave = self.step(wave, h)
            if (every and n % every == 0) or n == n_steps:
                out.append(wave)
        return out


def step_schrodinger(wave: WaveState, scenario, gauge: GaugeField | None = None,
                     method: str = "auto") -> WaveState:
    return SchrodingerSolver(scenario, gauge, method).step(wave)


def fidelity(a: WaveState, b: WaveState) -> float:
    return float(abs(np.vdot(a.psi, b.psi)) * a.grid.cell_volume)


# --- nonlinear Psi_k family ----------------------------------------------------------


def amplitude_curvature(psi: np.ndarray, grid, scenario, rel_floor: float = REL_FLOOR) -> np.ndarray:
    """m^AB (d_A d_B |Psi|) / |Psi|, set to zero below the density floor."""
    amp = np.abs(psi)
    D = Differentiator(grid.spacing, grid.points, scenario.periodic, scenario.stencil_order)
    masses = scenario.axis_masses
    curv = sum(D.d2(amp, a) / masses[a] for a in range(grid.ndim))
    known = amp**2 >= rel_floor * np.max(amp**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(known, curv / np.where(known, amp, 1.0), 0.0)


def nonlinear_residual(psi_k, k: float, scenario, grid=None) -> np.ndarray:
    """(eta^2/(2k^2) - 4 xi) m^AB (d_A d_B |Psi_k|)/|Psi_k| Psi_k on the grid."""
    if isinstance(psi_k, WaveState):
        grid = psi_k.grid
        psi_k = psi_k.psi
    grid = grid or scenario.require_grid()
    c = RegraduationConstants.from_scenario(scenario).coefficient(k)
    if c == 0.0:
        return np.zeros(grid.shape, dtype=complex)
    return c * amplitude_curvature(psi_k, grid, scenario) * psi_k


class NonlinearSolver:
    """Split-step integrator for Psi_k including the nonlinear amplitude term.

    The kinetic factor uses ``eta / k`` in place of hbar; the potential
    factor uses the real field ``V + c m^AB (d d |Psi|)/|Psi|``, which does
    not change |Psi| and so is evaluated from the current amplitude.
    """

    def __init__(self, scenario, k: float):
        if not scenario.periodic:
            raise ValueError("the nonlinear split-step solver needs a periodic grid")
        self.scenario = scenario
        self.grid = scenario.require_grid()
        self.k = float(k)
        self.constants = RegraduationConstants.from_scenario(scenario)
        self.hk = self.constants.hbar_k(self.k)
        self.c = self.constants.coefficient(self.k)
        self.points = self.grid.points_array()
        self.kvec = [2 * np.pi * np.fft.fftfreq(p, d=h) for p, h in zip(self.grid.points, self.grid.spacing)]
        energy = np.zeros(self.grid.shape)
        for a, (kv, m) in enumerate(zip(self.kvec, scenario.axis_masses)):
            shape = [1] * self.grid.ndim
            shape[a] = -1
            energy = energy + (self.hk * kv.reshape(shape)) ** 2 / (2 * m)
        self.energy = energy

    def _potential_factor(self, psi, t, h):
        U = self.scenario.potential_at(self.points, t)
        if self.c:
            U = U + self.c * amplitude_curvature(psi, self.grid, self.scenario)
        return np.exp(-0.5j * h * U / self.hk)

    def step(self, wave: WaveState, h: float | None = None) -> WaveState:
        if h is None:
            h = self.scenario.dt_field
        tm = wave.t + 0.5 * h
        psi = self._potential_factor(wave.psi, tm, h) * wave.psi
        psi = np.fft.ifftn(np.exp(-1j * h * self.energy / self.hk) * np.fft.fftn(psi))
        psi = self._potential_factor(psi, tm, h) * psi
        return replace(wave, psi=psi, t=wave.t + h, k=self.k)

    def evolve(self, wave: WaveState, n_steps: int, h: float | None = None) -> WaveState:
        for _ in range(n_steps):
            wave = self.step(wave, h)
        return wave
