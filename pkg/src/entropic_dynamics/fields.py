"""Hamiltonian evolution of the canonical pair (rho, Phi) on a grid.

The pair obeys

    d rho / dt = -d_A (rho v^A),                v^A = m^AB (d_B Phi - A_B)
    d Phi / dt = -1/2 m_AB v^A v^B - V - Q,

with the quantum potential

    Q = xi m^AB (-r_A r_B - 2 d_A r_B),          r_A = d_A log rho,

which is the exact variational derivative of the Fisher term
``xi m^AB int (d_A rho d_B rho) / rho``.  Spatial derivatives use
high-order central stencils.

Cells where rho drops below ``1e-12 * max(rho)`` form the masked region.
There ``log rho`` and the periodic part of Phi are replaced by a smooth
continuation of their supported values (see
:mod:`entropic_dynamics.extension`), the flux is carried by the continued
density and the stored Phi is slaved to the continuation after every
step.  A masked region enclosed by support is a node and halts the run.

On periodic grids Phi may wind: ``Phi(x + L_a e_a) = Phi(x) + W_a``.
Internally the solver works with the periodic part
``psi = Phi - sum_a W_a (x_a - lower_a) / L_a``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvariantViolation, NumericalError, SingularityError
from .extension import ExtensionCache, interior_holes, support_mask
from .kernel import DriftPotential, GaugeField
from .stencils import Differentiator

REL_FLOOR = 1e-12
MIN_ISLAND = 9


@dataclass(frozen=True)
class FieldState:
    """Canonical pair sampled on a grid at time ``t``.

    ``Phi`` holds samples of the continuous phase; on periodic grids
    ``winding[a]`` is its jump across the seam of axis ``a``.
    """

    grid: object
    rho: np.ndarray
    Phi: np.ndarray
    t: float = 0.0
    winding: tuple = ()

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        Phi = np.asarray(self.Phi, dtype=float)
        if rho.shape != self.grid.shape or Phi.shape != self.grid.shape:
            raise ValueError(f"fields must have grid shape {self.grid.shape}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "Phi", Phi)
        w = tuple(float(v) for v in self.winding) if len(self.winding) else (0.0,) * self.grid.ndim
        if len(w) != self.grid.ndim:
            raise ValueError("winding needs one entry per axis")
        object.__setattr__(self, "winding", w)

    @property
    def norm(self) -> float:
        return self.grid.integrate(self.rho)

    def with_fields(self, rho=None, Phi=None, t=None, winding=None) -> "FieldState":
        return replace(self, rho=self.rho if rho is None else rho, Phi=self.Phi if Phi is None else Phi,
                       t=self.t if t is None else t, winding=self.winding if winding is None else winding)


@dataclass(frozen=True)
class EnsembleHamiltonianReport:
    kinetic: float
    potential: float
    quantum: float
    quantum_direct: float
    t: float = 0.0

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.quantum


@dataclass(frozen=True)
class VelocityFields:
    """Drift b, osmotic u and current v, each of shape ``grid.shape + (D,)``."""

    drift: np.ndarray
    osmotic: np.ndarray
    current: np.ndarray


@dataclass
class _Frame:
    """Everything derived from one density with a frozen mask."""

    known: np.ndarray
    floor: float
    E: object
    s_ext: np.ndarray
    rho_k: np.ndarray
    r: list = field(default_factory=list)
    Q: np.ndarray | None = None


def initial_state(scenario) -> FieldState:
    from .states import GaussianState

    grid = scenario.require_grid()
    init = scenario.initial if scenario.initial is not None else GaussianState()
    rho, Phi, winding = init.fields(grid, scenario)
    return FieldState(grid, rho, Phi, 0.0, winding)


class FieldModel:
    """Discrete operators for one scenario and gauge.

    Parameters
    ----------
    scenario : Scenario
        Must carry a grid of dimension at most two.
    gauge : GaugeField, optional
        Defaults to the scenario's vector potential, if any.
    """

    def __init__(self, scenario, gauge: GaugeField | None = None, rel_floor: float = REL_FLOOR):
        self.scenario = scenario
        self.grid = grid = scenario.require_grid()
        self.periodic = scenario.periodic
        self.gauge = gauge if gauge is not None else GaugeField.from_scenario(scenario)
        self.rel_floor = rel_floor
        self.D = Differentiator(grid.spacing, grid.points, self.periodic, scenario.stencil_order)
        self.extension = ExtensionCache(grid.spacing, self.periodic)
        self.inv_mass = 1.0 / scenario.axis_masses
        self.points = grid.points_array()
        self._offsets = [(m - lo) / L for m, lo, L in zip(grid.mesh(), grid.lower, grid.lengths)]
        self._V_static = None if scenario.potential.time_dependent else self._potential(0.0)
        self._A_static = None
        self._Lambda_static = None
        if self.gauge is None:
            self._A_static = np.zeros(grid.shape + (grid.ndim,))
        elif not self.gauge.time_dependent:
            self._A_static = self.gauge.lifted(self.points, 0.0)

    # --- external fields ---------------------------------------------------
    def _potential(self, t: float) -> np.ndarray:
        return self.scenario.potential_at(self.points, t)

    def potential(self, t: float) -> np.ndarray:
        return self._V_static if self._V_static is not None else self._potential(t)

    def vector_potential(self, t: float) -> np.ndarray:
        if self._A_static is not None:
            return self._A_static
        return self.gauge.lifted(self.points, t)

    def potential_rate(self, t: float) -> np.ndarray:
        return self.scenario.potential.time_derivative(self.points, t, self.scenario)

    def vector_potential_rate(self, t: float) -> np.ndarray:
        if self.gauge is None:
            return np.zeros(self.grid.shape + (self.grid.ndim,))
        return self.gauge.lifted_time_derivative(self.points, t)

    # --- representation ------------------------------------------------------
    def ramp(self, winding) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        if self.periodic:
            for w, off in zip(winding, self._offsets):
                if w:
                    out = out + w * off
        return out

    def periodic_part(self, state: FieldState) -> np.ndarray:
        return state.Phi - self.ramp(state.winding)

    # --- frames --------------------------------------------------------------
    def mask(self, rho: np.ndarray, check_nodes: bool = True):
        known, floor = support_mask(rho, self.rel_floor, self.periodic, MIN_ISLAND)
        if check_nodes and not known.all():
            holes = interior_holes(known, self.periodic)
            if holes:
                where = tuple(float(a[i]) for a, i in zip(self.grid.axes(), holes[0]))
                raise SingularityError(f"density fell below the floor inside the support near x = {where}")
        return known, floor

    def frame(self, rho: np.ndarray, known=None, floor=None, with_quantum: bool = True) -> _Frame:
        if known is None:
            known, floor = self.mask(rho)
        E = self.extension(known)
        with np.errstate(divide="ignore"):
            s = np.log(np.where(known, rho, 1.0))
        s_ext = (E @ s.ravel()).reshape(rho.shape)
        if not known.all():
            s_ext = np.where(known, s, np.minimum(s_ext, np.log(floor)))
        rho_k = np.where(known, rho, np.exp(s_ext))
        fr = _Frame(known, floor, E, s_ext, rho_k)
        if with_quantum:
            self._quantum(fr)
        return fr

    def _quantum(self, fr: _Frame) -> None:
        D = self.D
        rs = []
        for a in range(self.grid.ndim):
            with np.errstate(divide="ignore", invalid="ignore"):
                ra = np.where(fr.known, D.d(fr.rho_k, a) / np.where(fr.known, fr.rho_k, 1.0),
                              D.d(fr.s_ext, a))
            rs.append(ra)
        fr.r = rs
        xi = self.scenario.xi
        Q = np.zeros(self.grid.shape)
        if xi:
            for a in range(self.grid.ndim):
                Q += self.inv_mass[a] * (-rs[a] ** 2 - 2.0 * D.d(rs[a], a))
            Q *= xi
        fr.Q = Q

    def gauge_phase(self, t: float) -> np.ndarray | None:
        """Curl-free periodic part Lambda of the lifted vector potential, d Lambda = A_L.

        The continuation acts on psi - Lambda, which makes the masked-region
        phase covariant under gauge shifts.
        """
        if self.gauge is None or not self.periodic:
            return None
        if self._A_static is not None:
            if self._Lambda_static is None:
                self._Lambda_static = self._longitudinal(self._A_static)
            return self._Lambda_static
        return self._longitudinal(self.vector_potential(t))

    def _longitudinal(self, A: np.ndarray) -> np.ndarray | None:
        grid = self.grid
        div = np.zeros(grid.shape, dtype=complex)
        k2 = np.zeros(grid.shape)
        ks = []
        for a in range(grid.ndim):
            k = 2 * np.pi * np.fft.fftfreq(grid.points[a], d=grid.spacing[a])
            shape = [1] * grid.ndim
            shape[a] = -1
            ks.append(k.reshape(shape))
            k2 = k2 + ks[-1] ** 2
        for a in range(grid.ndim):
            div = div + 1j * ks[a] * np.fft.fftn(A[..., a])
        with np.errstate(divide="ignore", invalid="ignore"):
            spec = np.where(k2 == 0, 0.0, -div / k2)
        lam = np.real(np.fft.ifftn(spec))
        return lam if np.any(lam) else None

    def extend_phase(self, psi: np.ndarray, fr: _Frame, t: float = 0.0) -> np.ndarray:
        if fr.known.all():
            return psi
        lam = self.gauge_phase(t)
        if lam is None:
            return (fr.E @ psi.ravel()).reshape(psi.shape)
        return (fr.E @ (psi - lam).ravel()).reshape(psi.shape) + lam

    def velocity(self, psi_ext: np.ndarray, winding, t: float) -> list[np.ndarray]:
        """Current velocity per axis from the continued periodic phase."""
        A = self.vector_potential(t)
        out = []
        for a in range(self.grid.ndim):
            g = self.D.d(psi_ext, a)
            if self.periodic:
                g = g + winding[a] / self.grid.lengths[a]
            out.append(self.inv_mass[a] * (g - A[..., a]))
        return out

    # --- right-hand sides ------------------------------------------------------
    def flux_divergence(self, rho_k: np.ndarray, v: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for a in range(self.grid.ndim):
            out -= self.D.d(rho_k * v[a], a)
        return out

    def hj(self, fr: _Frame, v: list[np.ndarray], t: float) -> np.ndarray:
        kinetic = sum(0.5 * m * va**2 for m, va in zip(self.scenario.axis_masses, v))
        return -kinetic - self.potential(t) - fr.Q

    def rhs(self, rho: np.ndarray, psi: np.ndarray, winding, t: float, known=None, floor=None):
        """(d rho/dt, d psi/dt) with the mask frozen if ``known`` is given."""
        fr = self.frame(rho, known, floor)
        v = self.velocity(self.extend_phase(psi, fr, t), winding, t)
        return self.flux_divergence(fr.rho_k, v), self.hj(fr, v, t)

    # --- functionals -----------------------------------------------------------
    def fisher_density(self, fr: _Frame) -> list[list[np.ndarray]]:
        """Integrand of I_AB: (d_A rho d_B rho)/rho on support, rho r_A r_B outside."""
        D = self.D
        n = self.grid.ndim
        grads = [D.d(fr.rho_k, a) for a in range(n)]
        safe = np.where(fr.known, fr.rho_k, 1.0)
        out = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                q = np.where(fr.known, grads[a] * grads[b] / safe, fr.rho_k * fr.r[a] * fr.r[b])
                out[a][b] = out[b][a] = q
        return out

    def hamiltonian_parts(self, rho, psi, winding, t, known=None, floor=None):
        fr = self.frame(rho, known, floor)
        v = self.velocity(self.extend_phase(psi, fr, t), winding, t)
        dV = self.grid.cell_volume
        kinetic = sum(0.5 * m * np.sum(fr.rho_k * va**2) for m, va in zip(self.scenario.axis_masses, v)) * dV
        potential = float(np.sum(rho * self.potential(t)) * dV)
        q = self.fisher_density(fr)
        fisher = np.array([[np.sum(q[a][b]) * dV for b in range(len(q))] for a in range(len(q))])
        quantum = self.scenario.xi * float(np.sum(self.inv_mass * np.diag(fisher)))
        hbar = self.scenario.hbar
        direct = sum(hbar**2 / 8.0 * self.inv_mass[a] * np.sum(q[a][a]) for a in range(len(q))) * dV
        return float(kinetic), potential, quantum, float(direct), fisher

    def hamiltonian(self, rho, psi, winding, t, known=None, floor=None) -> float:
        k, p, q, _, _ = self.hamiltonian_parts(rho, psi, winding, t, known, floor)
        return k + p + q


# --- integrators ---------------------------------------------------------------


class FieldIntegrator:
    """Time stepper for a :class:`FieldModel`.

    ``method`` is ``"leapfrog"`` (default, symplectic, implicit midpoint
    phase) or ``"rk4"``.  The density mask is frozen over one step.
    """

    def __init__(self, model: FieldModel, method: str = "leapfrog", max_iter: int = 60,
                 norm_tolerance: float = 1e-9):
        if method not in ("leapfrog", "rk4"):
            raise ValueError(f"unknown integrator {method!r}")
        self.model = model
        self.method = method
        self.max_iter = max_iter
        self.norm_tolerance = norm_tolerance

    def half_phase(self, rho, psi, winding, h, t, known, floor):
        """Solve P = psi + h/2 G(rho, P) by fixed-point iteration."""
        m = self.model
        fr = m.frame(rho, known, floor)
        P = psi.copy()
        prev = np.inf
        for _ in range(self.max_iter):
            v = m.velocity(m.extend_phase(P, fr, t), winding, t)
            new = psi + 0.5 * h * m.hj(fr, v, t)
            change = np.max(np.abs(new - P)) / (1.0 + np.max(np.abs(new)))
            P = new
            if change < 1e-15 or (change < 1e-12 and change >= 0.5 * prev):
                return P
            prev = change
        if change > 1e-9:
            raise NumericalError(f"implicit phase half-step did not converge (residual {change:.2e}); "
                                 "reduce dt_field")
        return P

    def _density(self, rho, P, winding, h, t0, t1, known, floor):
        m = self.model
        fr0 = m.frame(rho, known, floor, with_quantum=False)
        P_ext = m.extend_phase(P, fr0, t0)
        f0 = m.flux_divergence(fr0.rho_k, m.velocity(P_ext, winding, t0))
        v1 = m.velocity(P_ext, winding, t1)
        rn = rho + h * f0
        prev = np.inf
        for _ in range(self.max_iter):
            fr = m.frame(rn, known, floor, with_quantum=False)
            new = rho + 0.5 * h * (f0 + m.flux_divergence(fr.rho_k, v1))
            change = np.max(np.abs(new - rn) / np.maximum(np.abs(new), floor))
            rn = new
            if change < 1e-13 or (change < 1e-10 and change >= 0.5 * prev):
                return rn
            prev = change
        if change > 1e-8:
            raise NumericalError(f"implicit density update did not converge (residual {change:.2e}); "
                                 "reduce dt_field")
        return rn

    def _leapfrog(self, rho, psi, winding, h, t, known, floor):
        m = self.model
        P = self.half_phase(rho, psi, winding, h, t, known, floor)
        rn = self._density(rho, P, winding, h, t, t + h, known, floor)
        fr = m.frame(rn, known, floor)
        v = m.velocity(m.extend_phase(P, fr, t + h), winding, t + h)
        return rn, P + 0.5 * h * m.hj(fr, v, t + h)

    def _rk4(self, rho, psi, winding, h, t, known, floor):
        m = self.model

        def f(r, p, tt):
            return m.rhs(r, p, winding, tt, known, floor)

        k1 = f(rho, psi, t)
        k2 = f(rho + 0.5 * h * k1[0], psi + 0.5 * h * k1[1], t + 0.5 * h)
        k3 = f(rho + 0.5 * h * k2[0], psi + 0.5 * h * k2[1], t + 0.5 * h)
        k4 = f(rho + h * k3[0], psi + h * k3[1], t + h)
        rn = rho + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        pn = psi + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        return rn, pn

    def midpoint_phase(self, state: FieldState, h: float) -> np.ndarray:
        """Phi at the half step as used by the leapfrog (full, not periodic part)."""
        m = self.model
        known, floor = m.mask(state.rho)
        P = self.half_phase(state.rho, m.periodic_part(state), state.winding, h, state.t, known, floor)
        return P + m.ramp(state.winding)

    def step(self, state: FieldState, h: float | None = None) -> FieldState:
        m = self.model
        if h is None:
            h = m.scenario.dt_field
        try:
            known, floor = m.mask(state.rho)
            psi = m.periodic_part(state)
            advance = self._leapfrog if self.method == "leapfrog" else self._rk4
            rn, pn = advance(state.rho, psi, state.winding, h, state.t, known, floor)
        except NumericalError as exc:
            if exc.snapshot is None:
                exc.snapshot = state
            raise
        if not (np.all(np.isfinite(rn)) and np.all(np.isfinite(pn))):
            raise NumericalError(f"non-finite field values at t = {state.t + h:.6g}", snapshot=state)
        known_n, floor_n = m.mask(rn)
        pn = m.extend_phase(pn, m.frame(rn, known_n, floor_n, with_quantum=False), state.t + h)
        new = FieldState(state.grid, rn, pn + m.ramp(state.winding), state.t + h, state.winding)
        drift = abs(new.norm - state.norm)
        if self.norm_tolerance is not None and drift > self.norm_tolerance and m.periodic:
            raise InvariantViolation(f"normalization changed by {drift:.2e} in one step at t = {new.t:.6g}")
        return new

    def evolve(self, state: FieldState, n_steps: int, h: float | None = None, every: int = 0,
               callback=None) -> list[FieldState]:
        """Advance ``n_steps``; returns snapshots every ``every`` steps (and the last)."""
        out = [state]
        for n in range(1, n_steps + 1):
            state = self.step(state, h)
            if callback is not None:
                callback(n, state)
            if (every and n % every == 0) or n == n_steps:
                out.append(state)
        return out


# --- module-level operations -------------------------------------------------------


def _model(scenario, gauge=None) -> FieldModel:
    return FieldModel(scenario, gauge)


def continuity_rhs(state: FieldState, scenario, gauge: GaugeField | None = None) -> np.ndarray:
    m = _model(scenario, gauge)
    fr = m.frame(state.rho, with_quantum=False)
    v = m.velocity(m.extend_phase(m.periodic_part(state), fr, state.t), state.winding, state.t)
    return m.flux_divergence(fr.rho_k, v)


def hamilton_jacobi_rhs(state: FieldState, scenario, gauge: GaugeField | None = None) -> np.ndarray:
    m = _model(scenario, gauge)
    fr = m.frame(state.rho)
    v = m.velocity(m.extend_phase(m.periodic_part(state), fr, state.t), state.winding, state.t)
    return m.hj(fr, v, state.t)


def quantum_potential(state: FieldState, scenario) -> np.ndarray:
    return FieldModel(scenario, GaugeField.empty(scenario)).frame(state.rho).Q


def step(state: FieldState, scenario, gauge: GaugeField | None = None,
         integrator: str = "leapfrog") -> FieldState:
    return FieldIntegrator(_model(scenario, gauge), integrator).step(state)


def ensemble_hamiltonian(state: FieldState, scenario, gauge: GaugeField | None = None,
                         model: FieldModel | None = None) -> EnsembleHamiltonianReport:
    m = model or _model(scenario, gauge)
    k, p, q, direct, _ = m.hamiltonian_parts(state.rho, m.periodic_part(state), state.winding, state.t)
    return EnsembleHamiltonianReport(k, p, q, direct, state.t)


def fisher_information(rho: np.ndarray, grid, periodic: bool = True, order: int = 8) -> np.ndarray:
    """I_AB = int (d_A rho d_B rho) / rho dx with the solver's discretization."""
    from .space import Scenario

    scen = Scenario(masses=(1.0,) * grid.ndim, n_particles=grid.ndim, grid=grid,
                    boundary="periodic" if periodic else "reflecting", stencil_order=order)
    m = FieldModel(scen, GaugeField.empty(scen))
    fr = m.frame(np.asarray(rho, dtype=float), with_quantum=False)
    m._quantum(fr)
    q = m.fisher_density(fr)
    return np.array([[np.sum(q[a][b]) * grid.cell_volume for b in range(grid.ndim)]
                     for a in range(grid.ndim)])


def momentum_expectation(state: FieldState, scenario) -> np.ndarray:
    """P_a = int rho sum_n d Phi / d x_n^a, one entry per spatial component."""
    m = FieldModel(scenario, GaugeField.empty(scenario))
    fr = m.frame(state.rho, with_quantum=False)
    psi = m.extend_phase(m.periodic_part(state), fr, state.t)
    d = scenario.spatial_dim
    out = np.zeros(d)
    for A in range(state.grid.ndim):
        g = m.D.d(psi, A) + (state.winding[A] / state.grid.lengths[A] if m.periodic else 0.0)
        out[A % d] += state.grid.integrate(state.rho * g)
    return out


def functional_derivatives(state: FieldState, scenario, gauge: GaugeField | None = None,
                           model: FieldModel | None = None):
    """Analytic (dH/drho, dH/dPhi) = (-d Phi/dt, d rho/dt) as grid fields."""
    m = model or _model(scenario, gauge)
    drho, dpsi = m.rhs(state.rho, m.periodic_part(state), state.winding, state.t)
    return -dpsi, drho


def momentum_derivatives(state: FieldState, scenario, axis: int = 0):
    """(dP/drho, dP/dPhi) for the momentum component ``axis``."""
    m = FieldModel(scenario, GaugeField.empty(scenario))
    fr = m.frame(state.rho, with_quantum=False)
    psi = m.extend_phase(m.periodic_part(state), fr, state.t)
    d = scenario.spatial_dim
    dP_drho = np.zeros(state.grid.shape)
    dP_dPhi = np.zeros(state.grid.shape)
    for A in range(axis, state.grid.ndim, d):
        dP_drho += m.D.d(psi, A) + (state.winding[A] / state.grid.lengths[A] if m.periodic else 0.0)
        dP_dPhi -= m.D.d(state.rho, A)
    return dP_drho, dP_dPhi


def poisson_bracket(f_grad, g_grad, grid) -> float:
    """{f, g} = int (df/drho dg/dPhi - df/dPhi dg/drho) dx."""
    fr, fp = (np.asarray(a, dtype=float) for a in f_grad)
    gr, gp = (np.asarray(a, dtype=float) for a in g_grad)
    shapes = {fr.shape, fp.shape, gr.shape, gp.shape}
    if shapes != {tuple(grid.shape)}:
        raise ValueError(f"functional derivatives must all have grid shape {grid.shape}, got {shapes}")
    return grid.integrate(fr * gp - fp * gr)


def velocity_fields(state: FieldState, scenario, gauge: GaugeField | None = None) -> VelocityFields:
    m = _model(scenario, gauge)
    fr = m.frame(state.rho)
    v = np.stack(m.velocity(m.extend_phase(m.periodic_part(state), fr, state.t), state.winding, state.t), axis=-1)
    r = np.stack(fr.r, axis=-1)
    u = -0.5 * scenario.eta * m.inv_mass * r
    return VelocityFields(drift=v - u, osmotic=u, current=v)


def drift_potential(state: FieldState, scenario, model: FieldModel | None = None) -> DriftPotential:
    """phi = Phi/eta + log rho^(1/2) as a grid drift potential with stencil gradients.

    ``model`` may be passed to reuse its cached extension operators; its
    vector potential is not used here.
    """
    m = model or FieldModel(scenario, GaugeField.empty(scenario))
    fr = m.frame(state.rho)
    psi = m.extend_phase(m.periodic_part(state), fr, state.t)
    eta = scenario.eta
    grads = []
    for a in range(state.grid.ndim):
        g = m.D.d(psi, a) + (state.winding[a] / state.grid.lengths[a] if m.periodic else 0.0)
        grads.append(g / eta + 0.5 * fr.r[a])
    values = (psi + m.ramp(state.winding)) / eta + 0.5 * fr.s_ext
    return DriftPotential.from_grid(state.grid, values, periodic=m.periodic, gradient_values=grads)


# --- action and energy balance ---------------------------------------------------------


def action_value(trajectory, scenario, gauge: GaugeField | None = None,
                 integrator: FieldIntegrator | None = None) -> float:
    """Discrete action of a uniformly spaced trajectory.

    Uses the phase at each half step, recomputed from the snapshot that
    starts the step; the leapfrog update is exactly the stationarity
    condition of this sum.
    """
    traj = list(trajectory)
    if len(traj) < 3:
        raise ValueError("the action needs at least three snapshots")
    times = np.array([s.t for s in traj])
    steps = np.diff(times)
    h = float(steps[0])
    if not np.allclose(steps, h, rtol=1e-9, atol=1e-14):
        raise ValueError("trajectory snapshots must be uniformly spaced in time")
    integ = integrator or FieldIntegrator(_model(scenario, gauge))
    m = integ.model
    dV = m.grid.cell_volume
    total = 0.0
    for a, b in zip(traj[:-1], traj[1:]):
        known, floor = m.mask(a.rho)
        P = integ.half_phase(a.rho, m.periodic_part(a), a.winding, h, a.t, known, floor)
        Phi_half = P + m.ramp(a.winding)
        total += np.sum(Phi_half * (b.rho - a.rho)) * dV
        total -= 0.5 * h * (m.hamiltonian(a.rho, P, a.winding, a.t, known, floor)
                            + m.hamiltonian(b.rho, P, a.winding, b.t, known, floor))
    return float(total)


@dataclass(frozen=True)
class EnergyBalanceReport:
    times: np.ndarray
    energy: np.ndarray
    power: np.ndarray
    work: np.ndarray

    @property
    def residual(self) -> float:
        """|Delta H - int dH/dt dt| at the final time."""
        return float(abs(self.energy[-1] - self.energy[0] - self.work[-1]))

    @property
    def relative_residual(self) -> float:
        return self.residual / max(abs(self.energy[0]), 1e-300)


def explicit_time_derivative(state: FieldState, model: FieldModel) -> float:
    """dH/dt at fixed (rho, Phi): int rho dV/dt - int rho v . dA/dt."""
    dV = model.grid.cell_volume
    fr = model.frame(state.rho, with_quantum=False)
    v = model.velocity(model.extend_phase(model.periodic_part(state), fr, state.t), state.winding, state.t)
    out = np.sum(state.rho * model.potential_rate(state.t)) * dV
    Adot = model.vector_potential_rate(state.t)
    for a in range(model.grid.ndim):
        out -= np.sum(fr.rho_k * v[a] * Adot[..., a]) * dV
    return float(out)


def energy_balance(trajectory, scenario, gauge: GaugeField | None = None) -> EnergyBalanceReport:
    """Compare the change of H with the work done by time-dependent potentials (trapezoid rule)."""
    traj = list(trajectory)
    m = _model(scenario, gauge)
    times = np.array([s.t for s in traj])
    energy = np.array([ensemble_hamiltonian(s, scenario, model=m).total for s in traj])
    power = np.array([explicit_time_derivative(s, m) for s in traj])
    work = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(times) * (power[1:] + power[:-1]))))
    return EnergyBalanceReport(times, energy, power, work)
