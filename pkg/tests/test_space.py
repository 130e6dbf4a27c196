import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_dynamics.errors import ConfigError
from entropic_dynamics.kernel import DriftPotential, build_kernel, metric_by_quadrature
from entropic_dynamics.space import (GridSpec, Scenario, build_mass_tensors, info_metric, kappa_from_alpha,
                                     log_partition, log_partition_quadrature)


@pytest.mark.parametrize("masses, d, diag, total", [
    ((1.0,), 1, [1.0], 1.0),
    ((1.0, 3.0), 1, [1.0, 3.0], 4.0),
    ((2.0,), 3, [2.0, 2.0, 2.0], 2.0),
])
def test_mass_tensor_entries(masses, d, diag, total):
    mt = build_mass_tensors(Scenario(masses=masses, n_particles=len(masses), spatial_dim=d))
    np.testing.assert_array_equal(mt.diagonal, diag)
    np.testing.assert_array_equal(mt.inverse_diagonal, 1.0 / np.asarray(diag))
    assert mt.total_mass == total


@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=3), st.integers(1, 3))
def test_mass_times_inverse_is_identity(masses, d):
    mt = build_mass_tensors(Scenario(masses=tuple(masses), n_particles=len(masses), spatial_dim=d))
    np.testing.assert_allclose(mt.matrix() @ mt.inverse_matrix(), np.eye(len(masses) * d), rtol=0, atol=1e-15)


@pytest.mark.parametrize("m, dt, C, expected", [(1.0, 1.0, 1.0, 1.0), (2.0, 0.5, 0.5, 2.0)])
def test_info_metric_closed_form(m, dt, C, expected):
    gamma = info_metric(Scenario(masses=(m,), dt=dt), C)
    np.testing.assert_allclose(gamma, [[expected]], rtol=1e-15)


def test_default_metric_scale_makes_metric_equal_mass():
    sc = Scenario(masses=(1.0, 3.0), n_particles=2, dt=0.01, eta=0.7)
    np.testing.assert_allclose(info_metric(sc), build_mass_tensors(sc).matrix(), rtol=1e-15)


@pytest.mark.parametrize("masses, d", [((1.0,), 1), ((1.0, 2.5), 1), ((2.0,), 2)])
@pytest.mark.parametrize("dt", [1e-2, 1e-3])
def test_metric_by_quadrature_matches_closed_form(masses, d, dt):
    # alpha = m / (eta dt) >= 1e2 on every axis
    sc = Scenario(masses=masses, n_particles=len(masses), spatial_dim=d, dt=dt)
    for C in (None, 0.3):
        np.testing.assert_allclose(metric_by_quadrature(sc, C), info_metric(sc, C), rtol=1e-6, atol=1e-9)


def test_metric_quadrature_with_linear_drift():
    # a linear drift only shifts the kernel, so the metric is untouched
    sc = Scenario(dt=1e-3)
    phi = DriftPotential.linear([0.8])
    np.testing.assert_allclose(metric_by_quadrature(sc, x=[0.4], phi=phi), info_metric(sc), rtol=1e-6)


@pytest.mark.parametrize("alpha, d, slope, expected", [(1.0, 1, 0.0, 1.0), (4.0, 3, 0.0, 0.75), (1.0, 1, 0.5, 1.25)])
def test_kappa_from_alpha(alpha, d, slope, expected):
    sc = Scenario(spatial_dim=d, dt=1.0 / alpha)
    kern = build_kernel(np.zeros(d), DriftPotential.linear([slope] + [0.0] * (d - 1)), None, sc)
    assert kappa_from_alpha([alpha], kern).kappa_n[0] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("alpha, g, d", [(1.0, 0.5, 1), (4.0, 0.0, 3), (2.3, -0.7, 2)])
def test_kappa_matches_derivative_of_quadrature_log_partition(alpha, g, d):
    h = 1e-4 * alpha
    fd = -2 * (log_partition_quadrature(alpha + h, g, d) - log_partition_quadrature(alpha - h, g, d)) / (2 * h)
    closed = -2 * (log_partition(alpha + h, g, d) - log_partition(alpha - h, g, d)) / (2 * h)
    sc = Scenario(spatial_dim=d, dt=1.0 / alpha)
    kern = build_kernel(np.zeros(d), DriftPotential.linear([g] * d), None, sc)
    kappa = kappa_from_alpha([alpha], kern).kappa_n[0]
    assert fd == pytest.approx(kappa, rel=1e-6)
    assert closed == pytest.approx(kappa, rel=1e-6)


def test_kappa_rejects_non_positive_alpha():
    kern = build_kernel(np.zeros(1), DriftPotential.zero(1), None, Scenario())
    with pytest.raises(ValueError):
        kappa_from_alpha([0.0], kern)


def test_hbar_follows_xi():
    assert Scenario(xi=0.125).hbar == 1.0
    assert Scenario(xi=0.5).hbar ** 2 == pytest.approx(8 * 0.5, rel=1e-15)


@pytest.mark.parametrize("kwargs", [dict(masses=(-1.0,)), dict(eta=0.0), dict(xi=-0.1), dict(dt=0.0),
                                    dict(boundary="sticky"), dict(n_particles=2)])
def test_scenario_validation(kwargs):
    with pytest.raises(ConfigError):
        Scenario(**kwargs)


def test_grid_rules():
    with pytest.raises(ConfigError):
        GridSpec.uniform(0, 1, 8)
    with pytest.raises(ConfigError):
        GridSpec.uniform(0, 1, 100)
    g = GridSpec.uniform(-1, 1, 64, ndim=2)
    assert g.shape == (64, 64) and g.spacing == (2 / 64, 2 / 64)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(4.0)


def test_grid_solvers_need_low_dimension():
    sc = Scenario(n_particles=3, masses=(1, 1, 1), grid=GridSpec.uniform(-1, 1, 16, ndim=3))
    with pytest.raises(ConfigError):
        sc.require_grid()


@settings(max_examples=30)
@given(st.floats(-1e3, 1e3))
def test_wrap_lands_in_domain(x):
    g = GridSpec.uniform(-2.0, 3.0, 32)
    y = g.wrap(np.array([[x]]))
    assert -2.0 <= y[0, 0] < 3.0 + 1e-12
