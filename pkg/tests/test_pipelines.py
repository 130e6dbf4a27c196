import numpy as np
import pytest

from entropic_dynamics import pipelines as pl
from entropic_dynamics.errors import ConfigError
from entropic_dynamics.states import BimodalState, GaussianState

from support import coherent, free_packet


def test_substeps():
    assert pl.substeps(free_packet(dt=4e-3, dt_field=1e-3)) == 4
    with pytest.raises(ConfigError):
        pl.substeps(free_packet(dt=2.5e-3, dt_field=1e-3))
    with pytest.raises(ConfigError):
        pl.substeps(free_packet(dt=1e-3, dt_field=2e-3))


def test_analytic_variance_only_for_free_gaussians():
    assert pl.analytic_variance(free_packet(), 2.0) == pytest.approx(2.0)
    assert pl.analytic_variance(coherent(), 1.0) is None


def test_run_fields_series_and_snapshots():
    sc = coherent(t_final=0.2)
    run = pl.run_fields(sc, snapshots=5, rows=10)
    assert run.trajectory[0].t == 0.0 and run.final.t == pytest.approx(0.2)
    assert len(run.trajectory) == 6 and len(run.series) == 11
    assert run.series_header[:6] == ["t", "kinetic", "potential", "quantum", "total", "norm"]
    energy = np.array([r[4] for r in run.series])
    assert np.ptp(energy) < 1e-7


def test_run_wave_keeps_the_norm():
    run = pl.run_wave(coherent(t_final=0.2))
    norms = [r[1] for r in run.series]
    assert max(norms) - min(norms) < 1e-12


def test_staggered_walkers_follow_the_fields():
    sc = free_packet(points=256, length=20.0, dt=4e-3, dt_field=1e-3, t_final=0.4, walkers=20_000)
    run = pl.run_walkers(sc, snapshots=2)
    assert run.fields[-1].t == pytest.approx(run.final.t)
    l1 = pl.l1_distance(run.densities[-1], run.fields[-1].rho, sc.grid, pl.L1_COARSEN)
    assert l1 < 0.05


def test_small_comparison():
    sc = free_packet(points=256, length=20.0, dt=1e-2, dt_field=1e-3, t_final=0.5, walkers=20_000)
    rep = pl.compare(sc, snapshots=2)
    assert rep.max_gap < 1e-4
    assert rep.variance_errors["fields"] < 1e-3 and rep.variance_errors["wave"] < 1e-3
    assert rep.variance_errors["walkers"] < 0.05
    assert len(rep.rows) == 3 and rep.walkers == 20_000


def test_dt_sweep_is_second_order():
    sc = coherent(t_final=0.4, dt=4e-3, dt_field=4e-3)
    for pipeline in ("fields", "wave"):
        tab = pl.dt_sweep(sc, pipeline)
        assert tab.monotone
        assert tab.fitted_order >= 1.9
        assert len(tab.rows()) == 3


def test_sweep_horizon_must_be_a_whole_number_of_steps():
    with pytest.raises(ConfigError):
        pl.dt_sweep(coherent(t_final=0.01, dt=3e-3), "fields")
    with pytest.raises(ValueError):
        pl.convergence(coherent(), "temperature")


def test_arrow_pipeline_on_bimodal_density():
    sc = free_packet(points=256, length=16.0, dt=0.5, initial=BimodalState(3.0, 0.5))
    rep = pl.arrow(sc, n_probes=5)
    assert rep.kl_to_gaussian > 10 * rep.quadrature_error
    assert len(rep.probes) == 5


def test_gauge_check_covers_every_pair():
    sc = coherent(t_final=0.05, dt=1e-3)
    reports = pl.gauge_check(sc)
    assert sorted((n, r.pipeline) for n, r in reports) == sorted(
        (n, p) for n in ("linear", "sinusoidal") for p in ("kernel", "fields", "wave"))
    assert max(r.max_deviation for _, r in reports) < 1e-10
    closed = pl.gauge_check(coherent(boundary="reflecting", t_final=0.01))
    assert all(r.pipeline != "wave" for _, r in closed)
