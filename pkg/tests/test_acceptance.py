"""Acceptance criteria, one PASS/FAIL line each in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from entropic_dynamics import pipelines as pl
from entropic_dynamics.config import load_scenario
from entropic_dynamics.fields import (FieldIntegrator, FieldModel, action_value, ensemble_hamiltonian,
                                      fisher_information, functional_derivatives, initial_state)
from entropic_dynamics.states import GaussianState, GroundState, UniformState, coherent_energy
from entropic_dynamics.wave import RegraduationConstants, nonlinear_residual, to_wave

from acceptance_log import record
from support import coherent, free_packet, oscillator

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
pytestmark = pytest.mark.acceptance

C1 = "1 three-way equivalence"
C2 = "2 free-packet variance"
C3 = "3 ensemble Hamiltonian conservation"
C4 = "4 regraduation"
C5 = "5 gauge invariance"
C6 = "6 arrow of time"
C7 = "7 Fisher information"
C8 = "8 functional derivatives"
C9 = "9 convergence orders"
C10 = "10 action stationarity"


def scenario(name):
    return load_scenario(CONFIGS / f"{name}.cfg").scenario


@pytest.fixture(scope="module")
def free_comparison():
    sc = scenario("free_packet")
    start = time.perf_counter()
    rep = pl.compare(sc, size=100_000)
    return sc, rep, time.perf_counter() - start


def test_three_way_equivalence(free_comparison):
    sc, rep, seconds = free_comparison
    ok = [record(C1, sc.grid.points == (512,) and rep.rows[-1][0] == pytest.approx(2.0),
                 f"grid {sc.grid.points[0]} points to t = {rep.rows[-1][0]:g}"),
          record(C1, rep.max_gap < 1e-4, f"max|rho - |Psi|^2| = {rep.max_gap:.2e} (< 1e-4)"),
          record(C1, rep.max_l1 < 0.02, f"L1 walkers vs fields = {rep.max_l1:.4f} with M = {rep.walkers} (< 0.02)"),
          record(C1, seconds < 60, f"runtime {seconds:.1f} s (< 60 s)")]
    assert all(ok)


def test_free_packet_variance(free_comparison):
    _, rep, _ = free_comparison
    e = rep.variance_errors
    ok = [record(C2, e["fields"] < 1e-3, f"fields rel err {e['fields']:.1e} (< 1e-3)"),
          record(C2, e["wave"] < 1e-3, f"wave rel err {e['wave']:.1e} (< 1e-3)"),
          record(C2, e["walkers"] < 0.02, f"walkers rel err {e['walkers']:.1e} (< 2%)")]
    assert all(ok)


def test_hamiltonian_conservation():
    # leapfrog energy error oscillates with amplitude ~ h^2; h = 2e-3 keeps it near 5e-7
    sc = coherent(shift=1.0, dt=2e-3, dt_field=2e-3)
    model = FieldModel(sc)
    integ = FieldIntegrator(model)
    s = initial_state(sc)
    e0 = ensemble_hamiltonian(s, sc, model=model).total
    drift = 0.0
    for n in range(1, 10_001):
        s = integ.step(s)
        if n % 100 == 0:
            drift = max(drift, abs(ensemble_hamiltonian(s, sc, model=model).total - e0))
    sg = oscillator()
    e_ground = ensemble_hamiltonian(initial_state(sg), sg).total
    ok = [record(C3, drift < 1e-6, f"coherent-state drift {drift:.1e} over 1e4 leapfrog steps (< 1e-6)"),
          record(C3, abs(e0 - coherent_energy(1.0, 1.0, 0.0)) < 1e-6, f"coherent H = {e0:.9f} (1.0)"),
          record(C3, abs(e_ground - 0.5) < 1e-6, f"ground-state H = {e_ground:.9f} (hbar omega / 2 within 1e-6)")]
    assert all(ok)


def test_regraduation():
    sigma = 1.0
    sc = free_packet(initial=GaussianState(0.0, sigma, 0.0))
    consts = RegraduationConstants.from_scenario(sc)
    s = initial_state(sc)
    k_hat = consts.k_hat
    at_hat = float(np.max(np.abs(nonlinear_residual(to_wave(s, consts, k_hat), k_hat, sc))))
    k = 2 * k_hat
    got = float(np.max(np.abs(nonlinear_residual(to_wave(s, consts, k), k, sc))))
    m = sc.masses[0]
    expected = abs(consts.coefficient(k)) / (2 * m * sigma**2) * (2 * np.pi * sigma**2) ** -0.25
    ok = [record(C4, at_hat == 0.0, f"residual at k_hat = {at_hat:.1e}"),
          record(C4, abs(got - expected) <= 1e-8 * expected,
                 f"max norm at 2 k_hat = {got:.12f} vs {expected:.12f} (rel {abs(got / expected - 1):.1e})")]
    assert all(ok)


def test_gauge_invariance():
    sc = scenario("gauge")
    ok = []
    for name, rep in pl.gauge_check(sc, n_steps=1000):
        limit = 1e-12 if rep.pipeline == "kernel" else 1e-10
        ok.append(record(C5, rep.max_deviation <= limit,
                         f"{name}/{rep.pipeline} {rep.max_deviation:.1e} (<= {limit:.0e})"))
    assert len(ok) == 6 and all(ok)


def test_arrow_of_time():
    sc = scenario("arrow")
    rep = pl.arrow(sc)
    flat = sc.replace(initial=UniformState())
    uni = pl.arrow(flat)
    ok = [record(C6, rep.kl_to_gaussian > 10 * rep.quadrature_error,
                 f"bimodal KL {rep.kl_to_gaussian:.3f} vs quadrature error {rep.quadrature_error:.1e}"),
          record(C6, uni.kl_forward_reverse < 1e-8 and uni.kl_to_gaussian < 1e-8,
                 f"uniform KL {max(uni.kl_forward_reverse, uni.kl_to_gaussian):.1e} (< 1e-8)")]
    assert all(ok)


def test_fisher_information():
    sigma = 0.8
    sc = free_packet(initial=GaussianState(0.3, sigma, 0.0), masses=(2.0,))
    s = initial_state(sc)
    I = fisher_information(s.rho, sc.grid)[0, 0]
    rep = ensemble_hamiltonian(s, sc)
    quantum = sc.xi * I / sc.masses[0]
    ok = [record(C7, quantum == rep.quantum_direct,
                 f"xi I / m = {quantum:.15f}, quadrature {rep.quantum_direct:.15f}"),
          record(C7, abs(I - 1 / sigma**2) < 1e-6, f"I = {I:.10f} vs 1/sigma^2 = {1 / sigma**2:.10f}")]
    assert all(ok)


def test_functional_derivatives():
    sc = oscillator(initial=GaussianState(0.8, 0.9, 2 * np.pi * 2 / 20))
    model = FieldModel(sc)
    s = initial_state(sc)
    dH_drho, dH_dPhi = functional_derivatives(s, sc, model=model)
    x = sc.grid.axis(0)
    bump = np.exp(-((x - 0.5) ** 2) / 0.5) * np.cos(1.3 * x)
    H = lambda st: ensemble_hamiltonian(st, sc, model=model).total
    ok = []
    for name, grad, make in (("rho", dH_drho, lambda e: s.with_fields(rho=s.rho + e * bump)),
                             ("Phi", dH_dPhi, lambda e: s.with_fields(Phi=s.Phi + e * bump))):
        eps = 1e-5
        fd = (H(make(eps)) - H(make(-eps))) / (2 * eps)
        an = sc.grid.integrate(grad * bump)
        rel = abs(fd - an) / abs(an)
        ok.append(record(C8, rel < 1e-5, f"dH/d{name}: analytic {an:.10f}, finite difference {fd:.10f} "
                                         f"(rel {rel:.1e} < 1e-5)"))
    assert all(ok)


def test_convergence_orders():
    sc = scenario("harmonic")
    ok = []
    for tab in pl.convergence(sc, "dt_field"):
        ok.append(record(C9, tab.fitted_order >= 1.9 and tab.monotone,
                         f"{tab.pipeline} temporal order {tab.fitted_order:.3f} (>= 1.9)"))
    walk = pl.walker_sweep(sc)
    ok.append(record(C9, abs(walk.fitted_order + 0.5) <= 0.15,
                     f"walker L1 slope {walk.fitted_order:.3f} (-0.5 +- 0.15)"))
    assert all(ok)


def test_action_stationarity():
    sc = coherent(shift=1.0)
    traj = FieldIntegrator(FieldModel(sc)).evolve(initial_state(sc), 40, every=1)
    A = action_value(traj, sc)
    x = sc.grid.axis(0)
    bump = (x - 1.0) * np.exp(-((x - 1.0) ** 2))
    worst = 0.0
    for k in (10, 20, 30):
        for name in ("rho", "Phi"):
            def varied(e):
                t = list(traj)
                t[k] = t[k].with_fields(**{name: getattr(t[k], name) + e * bump})
                return action_value(t, sc)
            eps = 1e-6
            worst = max(worst, abs(varied(eps) - varied(-eps)) / (2 * eps))
    # control: the endpoint is not varied freely, so its slope is the boundary term int Phi delta rho
    end = list(traj)
    end_slope = abs(action_value(end[:-1] + [end[-1].with_fields(rho=end[-1].rho + 1e-6 * bump)], sc) - A) / 1e-6
    g = oscillator()
    gtraj = FieldIntegrator(FieldModel(g)).evolve(initial_state(g), 40, every=1)
    Ag = action_value(gtraj, g)
    T = gtraj[-1].t
    ok = [record(C10, worst < 1e-6 * abs(A), f"max variation slope {worst:.1e} vs 1e-6 |A| = {1e-6 * abs(A):.1e}"),
          record(C10, end_slope > 1e-3, f"endpoint control slope {end_slope:.2e} (non-zero)"),
          record(C10, abs(Ag + 0.5 * T) < 1e-9 * T, f"stationary ground state A = {Ag:.12f} (-T/2 = {-0.5 * T:g})")]
    assert all(ok)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
