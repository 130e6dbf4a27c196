import numpy as np
import pytest

from entropic_dynamics.ensemble import (WalkerEnsemble, arrow_diagnostic, chapman_kolmogorov_check, coarse_cells,
                                        estimate_density, initialize_walkers, l1_distance, moments, propagate,
                                        reflect, sample_density)
from entropic_dynamics.kernel import DriftPotential
from entropic_dynamics.potentials import Free
from entropic_dynamics.space import GridSpec, Scenario
from entropic_dynamics.states import BimodalState, GaussianState, UniformState

from support import gaussian_density, line


def test_delta_walkers_spread_by_one_step():
    M = 100_000
    sc = Scenario(dt=1.0)
    ens = propagate(WalkerEnsemble.at_point([0.0], M, 1.0, seed=3), DriftPotential.zero(1), None, sc, 1)
    var = moments(ens)[1][0]
    sigma_mc = np.sqrt(2.0 / M)  # std of a sample variance of unit normals
    assert abs(var - 1.0) < 3 * sigma_mc


@pytest.mark.parametrize("k, m, dt", [(4, 1.0, 0.1), (10, 2.0, 0.05)])
def test_variance_after_k_steps(k, m, dt):
    M = 100_000
    sc = Scenario(masses=(m,), dt=dt)
    ens = propagate(WalkerEnsemble.at_point([0.0], M, dt, seed=1), DriftPotential.zero(1), None, sc, k)
    expected = k * dt / m
    assert moments(ens)[1][0] == pytest.approx(expected, abs=3 * expected * np.sqrt(2.0 / M))
    assert ens.step_index == k and ens.t == pytest.approx(k * dt)


def test_zero_steps_is_identity():
    ens = WalkerEnsemble.at_point([1.0, 2.0], 10, 1e-3)
    assert propagate(ens, DriftPotential.zero(2), None, Scenario(n_particles=2, masses=(1, 1)), 0) is ens


def test_constant_drift_moves_the_mean():
    M = 50_000
    sc = Scenario(dt=0.01)
    ens = propagate(WalkerEnsemble.at_point([0.0], M, 0.01, seed=2), DriftPotential.linear([1.5]), None, sc, 100)
    mean, var = moments(ens)
    assert mean[0] == pytest.approx(1.5, abs=4 * np.sqrt(1.0 / M))


def test_propagation_does_not_depend_on_jobs_or_chunks():
    g = line(-10, 10, 128)
    sc = Scenario(grid=g, dt=0.01, initial=GaussianState(0.0, 1.0, 0.0), walkers=5000)
    ens = initialize_walkers(sc)
    phi = DriftPotential.from_grid(g, np.sin(g.axis(0)))
    a = propagate(ens, phi, None, sc, 5, jobs=1)
    b = propagate(ens, phi, None, sc, 5, jobs=3, chunk=777)
    assert a.positions.tobytes() == b.positions.tobytes()


def test_dt_mismatch_is_rejected():
    with pytest.raises(ValueError):
        propagate(WalkerEnsemble.at_point([0.0], 4, 0.1), DriftPotential.zero(1), None, Scenario(dt=0.2), 1)


def test_histogram_of_a_single_cell():
    g = line(-1, 1, 16)
    x = g.axis(0)[5]
    est = estimate_density(WalkerEnsemble.at_point([x], 100, 1e-3), g)
    assert est.values[5] == pytest.approx(1.0 / g.cell_volume)
    assert np.count_nonzero(est.values) == 1
    assert est.norm == pytest.approx(1.0)


def test_histogram_of_normal_walkers():
    g = line(-10, 10, 256)
    rho = gaussian_density(g.axis(0))
    ens = WalkerEnsemble(sample_density(rho, g, 100_000, seed=5))
    assert l1_distance(estimate_density(ens, g), rho, g, coarsen=4) < 0.02


def test_kde_tends_to_histogram_as_bandwidth_shrinks():
    g = line(-10, 10, 256)
    ens = WalkerEnsemble(sample_density(gaussian_density(g.axis(0)), g, 20_000, seed=9))
    hist = estimate_density(ens, g).values
    gaps = [np.sum(np.abs(estimate_density(ens, g, "kde", bw).values - hist)) * g.cell_volume
            for bw in (0.5, 0.1, 0.01, 1e-4)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-10


def test_unknown_estimator():
    g = line(-1, 1, 16)
    with pytest.raises(ValueError):
        estimate_density(WalkerEnsemble.at_point([0.0], 3, 1e-3), g, method="magic")


def test_coarse_cells_average_blocks():
    v = np.arange(8.0)
    np.testing.assert_array_equal(coarse_cells(v, 4), [1.5, 5.5])
    assert coarse_cells(np.ones((8, 8)), 2).shape == (4, 4)


def test_reflection_folds_into_the_box():
    y = reflect(np.array([-0.5, 1.25, 3.5, 0.3]), 0.0, 1.0)
    np.testing.assert_allclose(y, [0.5, 0.75, 0.5, 0.3])


def test_open_boundary_freezes_escapees():
    g = line(-1, 1, 16)
    sc = Scenario(grid=g, boundary="open", dt=1.0, escape_cutoff=0.5)
    ens = propagate(WalkerEnsemble.at_point([0.9], 2000, 1.0, seed=4), DriftPotential.zero(1), None, sc, 3)
    assert ens.n_escaped > 0
    assert ens.size == 2000
    frozen = np.abs(ens.positions[ens.escaped, 0])
    assert np.all(frozen > 1.5)
    assert estimate_density(ens, g, periodic=False).count <= 2000 - ens.n_escaped


def test_initial_walkers_follow_the_density():
    sc = Scenario(grid=line(-10, 10, 256), initial=GaussianState(1.0, 0.5, 0.0), walkers=50_000, seed=8)
    ens = initialize_walkers(sc)
    mean, var = moments(ens)
    assert mean[0] == pytest.approx(1.0, abs=0.01)
    assert var[0] == pytest.approx(0.25, rel=0.03)


def test_chapman_kolmogorov_composition():
    g = line(-10, 10, 256)
    sc = Scenario(grid=g, dt=0.3)
    rho = gaussian_density(g.axis(0), 0.7) + 0.5 * gaussian_density(g.axis(0), 0.4, 3.0)
    assert chapman_kolmogorov_check(rho, sc) < 1e-13


def arrow_scenario(initial, dt=0.5, lower=-8.0, upper=8.0):
    return Scenario(grid=line(lower, upper, 256), dt=dt, potential=Free(), initial=initial)


def test_arrow_vanishes_for_uniform_density():
    sc = arrow_scenario(UniformState())
    rho = np.full(sc.grid.shape, 1 / 16)
    rep = arrow_diagnostic(rho, None, sc)
    assert rep.kl_forward_reverse < 1e-8
    assert rep.kl_to_gaussian < 1e-8


def test_arrow_of_gaussian_is_gaussian():
    sc = arrow_scenario(GaussianState(0.0, 1.0, 0.0), lower=-12, upper=12)
    rep = arrow_diagnostic(gaussian_density(sc.grid.axis(0)), None, sc, n_probes=5)
    assert rep.reverse_excess_kurtosis < 1e-6
    assert rep.kl_to_gaussian < 1e-8
    # not time symmetric: the reversed kernel is narrower than the forward one
    assert rep.kl_forward_reverse > 1e-3


def test_arrow_detects_bimodal_non_gaussianity():
    sc = arrow_scenario(BimodalState(3.0, 0.5))
    x = sc.grid.axis(0)
    rho = 0.5 * (gaussian_density(x, 0.5, -1.5) + gaussian_density(x, 0.5, 1.5))
    rep = arrow_diagnostic(rho, None, sc)
    assert rep.kl_to_gaussian > 10 * rep.quadrature_error
    assert rep.reverse_excess_kurtosis > 0.1


def test_arrow_skips_probes_next_to_empty_cells():
    # a short step keeps the interpolation window local
    sc = arrow_scenario(UniformState(), dt=0.01)
    rho = np.full(sc.grid.shape, 1 / 16)
    rho[60] = 0.0
    rep = arrow_diagnostic(rho, None, sc, probes=[[sc.grid.axis(0)[60]], [4.0]])
    assert len(rep.excluded) == 1 and len(rep.probes) == 1
