import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_dynamics.gauge import LinearGauge, SinusoidalGauge, transform
from entropic_dynamics.kernel import (DriftPotential, GaugeField, build_kernel, chapman_kolmogorov,
                                      gaussian_convolve, log_pdf, sample_step, transition_matrix)
from entropic_dynamics.potentials import UniformA
from entropic_dynamics.rng import WalkerStream, walker_normals
from entropic_dynamics.space import GridSpec, Scenario

from support import gaussian_density


def kernel_at(x=0.0, slope=0.0, m=1.0, eta=1.0, dt=1.0, A=None):
    sc = Scenario(masses=(m,), eta=eta, dt=dt, vector_potential=A)
    return build_kernel(np.array([x]), DriftPotential.linear([slope]), GaugeField.from_scenario(sc), sc)


def test_zero_drift_is_standard_normal():
    k = kernel_at()
    assert k.mean[0] == 0.0 and k.covariance[0] == 1.0


def test_linear_drift_mean_and_variance():
    k = kernel_at(slope=1.0, m=2.0, dt=0.1)
    assert k.mean[0] == pytest.approx(0.05, rel=1e-14)
    assert k.covariance[0] == pytest.approx(0.05, rel=1e-14)


def test_vector_potential_shifts_mean_against_it():
    assert kernel_at(A=UniformA(1.0)).mean[0] == pytest.approx(-1.0, rel=1e-14)


def test_log_pdf_mode_and_one_std():
    k = kernel_at(x=0.3, slope=0.7, dt=0.2)
    mode = log_pdf(k, k.x + k.mean)
    assert mode == pytest.approx(-0.5 * np.log(2 * np.pi * 0.2), rel=1e-14)
    assert log_pdf(k, k.x + k.mean + k.std) == pytest.approx(mode - 0.5, rel=1e-14)


def test_log_pdf_integrates_to_one():
    k = kernel_at(slope=-0.4, dt=0.3)
    u = np.linspace(-12, 12, 24001)[:, None]
    total = np.trapezoid(np.exp(log_pdf(k, u)), u[:, 0])
    assert total == pytest.approx(1.0, abs=1e-8)


def test_sampled_moments():
    n = 10**6
    sc = Scenario(dt=1.0)
    k = build_kernel(np.zeros((n, 1)), DriftPotential.zero(1), None, sc)
    dx = sample_step(k, np.random.default_rng(7))
    sigma = 1.0
    assert abs(dx.mean()) < 4 * sigma / 1e3
    assert dx.var() == pytest.approx(1.0, rel=0.01)


def test_sampling_is_reproducible_byte_for_byte():
    k = kernel_at(slope=0.2, dt=0.1)
    a = sample_step(k, WalkerStream(11, 5).at(3))
    b = sample_step(k, WalkerStream(11, 5).at(3))
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != sample_step(k, WalkerStream(11, 6).at(3)).tobytes()


def test_walker_streams_do_not_depend_on_chunking():
    whole = walker_normals(3, 9, 0, 1000, 3)
    parts = np.concatenate([walker_normals(3, 9, a, b, 3) for a, b in [(0, 17), (17, 600), (600, 1000)]])
    assert whole.tobytes() == parts.tobytes()
    single = WalkerStream(3, 421).at(9).standard_normal((3,))
    assert single.tobytes() == whole[421].tobytes()


def test_quarter_step_quarters_the_variance():
    n = 200_000
    z = walker_normals(1, 0, 0, n, 1)

    class Fixed:
        def standard_normal(self, shape):
            return z.reshape(shape)

    full = sample_step(build_kernel(np.zeros((n, 1)), DriftPotential.zero(1), None, Scenario(dt=1.0)), Fixed())
    quarter = sample_step(build_kernel(np.zeros((n, 1)), DriftPotential.zero(1), None, Scenario(dt=0.25)), Fixed())
    assert quarter.var() / full.var() == pytest.approx(0.25, rel=1e-12)


def test_drift_and_fluctuation_scaling():
    dts = np.logspace(-1, -4, 7)
    means = [kernel_at(slope=1.3, dt=dt).mean[0] for dt in dts]
    stds = [kernel_at(slope=1.3, dt=dt).std[0] for dt in dts]
    assert np.polyfit(np.log(dts), np.log(means), 1)[0] == pytest.approx(1.0, abs=0.05)
    assert np.polyfit(np.log(dts), np.log(stds), 1)[0] == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("eps", [0.02, 0.05, 0.15])
def test_kernel_maximizes_entropy_under_its_constraints(eps):
    # He4 keeps the normalization, mean and second moment; its minimum is -6, so eps < 1/6 stays positive
    k = kernel_at(slope=0.5, dt=0.2)
    u = np.linspace(-10, 10, 40001)
    du = u[1] - u[0]
    p = np.exp(log_pdf(k, u[:, None]))
    z = (u - k.mean[0]) / k.std[0]
    q = p * (1 + eps * (z**4 - 6 * z**2 + 3))
    assert np.all(q > 0)
    for moment in (0, 1, 2):
        assert np.sum(q * u**moment) * du == pytest.approx(np.sum(p * u**moment) * du, abs=1e-10)
    ent = lambda f: -np.sum(f * np.log(f)) * du
    assert ent(p) > ent(q)


def test_kernel_gauge_invariance():
    sc = Scenario(vector_potential=UniformA(0.4), dt=1e-2)
    phi = DriftPotential(lambda x: np.sin(x[..., 0]), lambda x: np.cos(x), dim=1)
    gauge = GaugeField.from_scenario(sc)
    pts = np.linspace(-3, 3, 41)[:, None]
    for chi in (LinearGauge(0.9), SinusoidalGauge(0.3, 1.7, 0.2)):
        phi1, gauge1 = transform(phi, gauge, chi, sc)
        k0, k1 = build_kernel(pts, phi, gauge, sc), build_kernel(pts, phi1, gauge1, sc)
        assert np.max(np.abs(k1.mean - k0.mean)) <= 1e-12
        assert np.array_equal(k1.covariance, k0.covariance)


def test_grid_drift_interpolation_matches_closed_form():
    g = GridSpec.uniform(-np.pi, np.pi, 256)
    phi = DriftPotential.from_grid(g, np.sin(g.axis(0)), gradient_values=[np.cos(g.axis(0))])
    x = np.random.default_rng(0).uniform(-np.pi, np.pi, (100, 1))
    np.testing.assert_allclose(phi.gradient(x), np.cos(x), atol=1e-3)
    # periodic wrap
    np.testing.assert_allclose(phi.gradient(x + 2 * np.pi), phi.gradient(x), atol=1e-12)


def test_chapman_kolmogorov_free_step_matches_fft_convolution():
    g = GridSpec.uniform(-10, 10, 128)
    sc = Scenario(grid=g, dt=0.5)
    rho = gaussian_density(g.axis(0))
    ck = chapman_kolmogorov(rho, g, DriftPotential.zero(1), None, sc, n_steps=2)
    fft = gaussian_convolve(rho, g, 1.0)
    np.testing.assert_allclose(ck, fft, atol=1e-10)
    np.testing.assert_allclose(ck, gaussian_density(g.axis(0), np.sqrt(2.0)), atol=1e-10)


def test_transition_matrix_columns_are_normalized():
    g = GridSpec.uniform(-5, 5, 64)
    sc = Scenario(grid=g, dt=0.1)
    K = transition_matrix(g, DriftPotential.linear([0.8]), None, sc)
    np.testing.assert_allclose(K.sum(axis=0), 1.0, atol=1e-12)


@settings(max_examples=25)
@given(st.floats(0.05, 3.0), st.floats(-2.0, 2.0))
def test_convolution_with_drift_shift(var, shift):
    g = GridSpec.uniform(-15, 15, 256)
    out = gaussian_convolve(gaussian_density(g.axis(0)), g, var, shift)
    np.testing.assert_allclose(out, gaussian_density(g.axis(0), np.sqrt(1 + var), shift), atol=1e-10)
