import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.errors import DomainError
from osclab.geometry import (
    AnnulusSector,
    CubicStretch,
    FlatStrip,
    PerturbedChart,
    chart_forward,
    constant_profile,
    jacobian_boundary,
    jacobian_volume,
    rho_eval,
    sawtooth_profile,
    sine_profile,
    stretched,
)

CHARTS = [FlatStrip(), AnnulusSector.constant(2.0), AnnulusSector.linear(2.0, 0.3)]


def test_flat_chart_is_identity():
    assert np.allclose(chart_forward(FlatStrip(), (0.3, -0.5)), (0.3, -0.5))


def test_annulus_origin_maps_to_radius():
    assert np.allclose(chart_forward(AnnulusSector.constant(2.0), (0.0, 0.0)), (2.0, 0.0), atol=1e-15)


def test_perturbed_flat_trace_is_graph():
    ch = PerturbedChart(FlatStrip(), constant_profile(3.0), 0.1)
    assert np.allclose(chart_forward(ch, (0.4, 0.0)), (0.4, 0.3))


def test_forward_rejects_points_outside_reference_square():
    with pytest.raises(DomainError):
        chart_forward(FlatStrip(), (1.5, 0.0))
    with pytest.raises(DomainError):
        chart_forward(AnnulusSector.constant(2.0), (0.0, -1.2))


def test_rho_eval_examples():
    assert rho_eval(constant_profile(2.0), 0.1, 0.0) == pytest.approx(0.2)
    # independent scalar evaluation: 0.1 * (sin(pi * 0.5) + 2)
    assert rho_eval(sine_profile(), 0.1, 0.05) == pytest.approx(0.1 * (np.sin(0.5 * np.pi) + 2))


def test_rho_eval_rejects_nonpositive_eps():
    with pytest.raises(DomainError):
        rho_eval(sine_profile(), 0.0, 0.1)
    with pytest.raises(DomainError):
        rho_eval(sine_profile(), -0.1, 0.1)


def test_alpha_bounds():
    with pytest.raises(DomainError):
        sine_profile(alpha=0.0)
    with pytest.raises(DomainError):
        sine_profile(alpha=1.5)
    sine_profile(alpha=1.0)


@pytest.mark.parametrize("profile", [constant_profile(2.0), sawtooth_profile(), sine_profile()])
def test_rho_eps_is_order_eps(profile):
    x = np.linspace(-1, 1, 101)
    bound = profile.rho(np.linspace(0, profile.period, 1001)).max()
    for eps in 0.2 * 0.5 ** np.arange(7):
        assert np.all(np.abs(rho_eval(profile, eps, x)) <= eps * bound + 1e-15)


def test_jacobian_boundary_examples():
    x = np.linspace(-1, 1, 11)
    assert np.allclose(jacobian_boundary(lambda t: np.stack([np.ones_like(t), np.zeros_like(t)], -1), x), 1.0)
    assert np.allclose(jacobian_boundary(AnnulusSector.constant(2.0), x), np.pi)


def test_sawtooth_trace_speed_is_sqrt2_and_matches_finite_differences():
    ch = PerturbedChart(FlatStrip(), sawtooth_profile(), 0.05)
    x = np.linspace(-0.97, 0.97, 57) + 1e-3        # away from kinks
    J = jacobian_boundary(ch, x)
    assert np.allclose(J, np.sqrt(2), rtol=1e-12)
    d = 1e-6
    fd = np.linalg.norm((ch.trace(x + d) - ch.trace(x - d)) / (2 * d), axis=-1)
    assert np.allclose(fd, J, rtol=1e-6)


def test_sawtooth_kink_uses_right_derivative():
    prof = sawtooth_profile()
    assert prof.dshape(0.0) == pytest.approx(-1.0)
    assert prof.dshape(1.0) == pytest.approx(1.0)


def test_jacobian_volume_examples():
    assert jacobian_volume(FlatStrip(), (0.2, -0.3)) == pytest.approx(1.0)
    ann = AnnulusSector.constant(2.0)
    assert jacobian_volume(ann, (0.3, 0.0)) == pytest.approx(np.pi / 2)
    assert jacobian_volume(ann, (0.3, 1.0)) == pytest.approx(5 * np.pi / 8)


def _fd_jacobian(chart, x, s, d):
    gx = (chart.forward(x + d, s) - chart.forward(x - d, s)) / (2 * d)
    gs = (chart.forward(x, s + d) - chart.forward(x, s - d)) / (2 * d)
    return abs(gx[0] * gs[1] - gx[1] * gs[0])


@pytest.mark.parametrize("chart", CHARTS)
def test_finite_difference_jacobians(chart, rng):
    pts = rng.uniform(-0.9, 0.9, size=(20, 2))
    for x, s in pts:
        exact = float(jacobian_volume(chart, (x, s)))
        e1 = abs(_fd_jacobian(chart, x, s, 1e-4) - exact)
        e2 = abs(_fd_jacobian(chart, x, s, 1e-5) - exact)
        assert e1 < 1e-6 * max(1, exact) and e2 < 1e-6 * max(1, exact)
        tang = (chart.trace(x + 1e-5) - chart.trace(x - 1e-5)) / 2e-5
        assert np.hypot(*tang) == pytest.approx(float(jacobian_boundary(chart, x)), rel=1e-8)


@pytest.mark.parametrize("chart", CHARTS)
def test_chart_inverse_round_trip(chart, rng):
    p = rng.uniform(-1, 1, size=(200, 2))
    X = chart.forward(p[:, 0], p[:, 1])
    x, s = chart.inverse(X[:, 0], X[:, 1])
    assert np.allclose(x, p[:, 0], atol=1e-12) and np.allclose(s, p[:, 1], atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, -1e-9), st.sampled_from([0.2, 0.05, 0.0125]),
       st.sampled_from(["sine", "sawtooth", "constant"]))
def test_lift_round_trip_and_range(x, s, eps, kind):
    prof = {"sine": sine_profile(), "sawtooth": sawtooth_profile(), "constant": constant_profile(2.0)}[kind]
    ch = PerturbedChart(FlatStrip(), prof, eps)
    _, t = ch.lift(x, s)
    r = ch.height(x)
    assert -1.0 - 1e-12 <= t <= r + 1e-12
    _, back = ch.unlift(x, t)
    assert abs(back - s) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.sampled_from([0.2, 0.05, 0.0125]))
def test_lift_branches_agree_on_interface(x, eps):
    ch = PerturbedChart(AnnulusSector.constant(2.0), sine_profile(), eps)
    _, t = ch.lift(x, 0.0)
    assert t == pytest.approx(float(ch.height(x)), abs=1e-15)
    assert np.allclose(ch.forward(x, 0.0), ch.trace(x), atol=1e-14)
    assert np.allclose(ch.trace(x), ch.base.forward(x, ch.height(x)), atol=1e-14)


@pytest.mark.parametrize("chart", CHARTS)
def test_perturbed_trace_converges_uniformly(chart):
    prof = sine_profile()
    x = np.linspace(-1, 1, 2001)
    lip = max(np.abs(chart.d_ds(x, 0.0)).max(), 1.0)
    for eps in 0.2 * 0.5 ** np.arange(7):
        ch = PerturbedChart(chart, prof, eps)
        dist = np.linalg.norm(ch.trace(x) - chart.trace(x), axis=-1).max()
        assert dist <= eps * 3.0 * lip + 1e-14


@pytest.mark.parametrize("prof", [sine_profile(), sawtooth_profile()])
def test_rho_eps_lipschitz_uniform_over_ladder(prof):
    x = np.linspace(-1, 1, 20001)
    lips = [np.abs(np.diff(prof.rho_eps(e, x)) / np.diff(x)).max() for e in 0.2 * 0.5 ** np.arange(7)]
    assert max(lips) <= 1.01 * prof.rho(np.linspace(0, 2, 5)).max() * 2


def test_profile_is_periodic():
    for prof in (sine_profile(), sawtooth_profile(), constant_profile(2.0)):
        z = np.linspace(-3, 3, 101)
        assert np.allclose(prof.rho(z + prof.period), prof.rho(z), atol=1e-13)
        assert np.all(prof.rho(z) >= 0)


def test_strip_area_of_flat_constant_layer():
    ch = PerturbedChart(FlatStrip(), constant_profile(2.0), 0.1)
    assert ch.strip().area() == pytest.approx(0.4, rel=1e-13)


def test_strip_area_over_eps_bounded_and_vanishing():
    areas = [PerturbedChart(AnnulusSector.constant(2.0), sine_profile(), e).strip().area()
             for e in 0.2 * 0.5 ** np.arange(7)]
    ratios = np.array(areas) / (0.2 * 0.5 ** np.arange(7))
    assert np.all(np.diff(areas) < 0)
    assert ratios.max() / ratios.min() < 1.2


def test_strip_contains():
    strip = PerturbedChart(FlatStrip(), constant_profile(2.0), 0.1).strip()
    assert strip.contains(np.array([0.0]), np.array([0.1]))[0]
    assert not strip.contains(np.array([0.0]), np.array([0.25]))[0]
    assert not strip.contains(np.array([0.0]), np.array([-0.05]))[0]


def test_cubic_stretch():
    sig = CubicStretch(0.25)
    t = np.linspace(*sig.domain, 11)
    assert np.allclose(sig.inverse(sig(t)), t)
    assert np.allclose(sig.derivative(t), 3 * t ** 2)
    chart_s, prof_s = stretched(FlatStrip(), constant_profile(2.0), 0.25)
    assert np.allclose(chart_s.forward(0.5, 0.0), (0.125, 0.0))
    assert chart_s.domain == sig.domain
