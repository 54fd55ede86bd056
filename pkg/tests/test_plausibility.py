import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff, ctra_fine
from percmon.exceptions import MissingHistory, ZeroInterval
from percmon.plausibility import (Condition, PlausibilityParams, RateEstimate, SpeedErrorMargins,
                                  check_plausibility, check_stream, ctra_displacement, ctra_jacobian,
                                  estimate_rates, min_detectable_speed_error, predict_position,
                                  transient_speed_threshold)
from percmon.types import ObjectState

H10 = math.radians(10.0)


def state(frame=0, t=0.0, **kw):
    base = dict(id=0, frame=frame, t=t, x=0.0, y=0.0, v=0.0, theta=0.0, l=1.0, w=1.0)
    base.update(kw)
    return ObjectState(**base)


@pytest.mark.parametrize("args, expected", [
    ((0.0, 5.0, 0.3, 1.0, 0.2), (0.0, 0.0)),
    ((1.0, 10.0, 0.0, 0.0, 0.0), (10.0, 0.0)),
    ((0.1, 10.0, 0.0, 2.0, 0.1), (1.01, 0.005)),
])
def test_ctra_displacement_examples(args, expected):
    assert ctra_displacement(*args) == pytest.approx(expected)


def test_estimate_rates_examples():
    a, b = state(v=3.0, dv=1.0), state(1, 0.1, v=3.0, dv=1.0)
    est = estimate_rates(a, b)
    assert (est.omega_hat, est.a_hat) == (0.0, 0.0)
    assert est.d_a == pytest.approx(math.sqrt(2) * 10.0)
    assert estimate_rates(state(theta=0.0), state(1, 0.1, theta=0.1)).omega_hat == pytest.approx(1.0)
    assert estimate_rates(state(v=10.0), state(1, 0.1, v=11.0)).a_hat == pytest.approx(10.0)


def test_heading_difference_wraps():
    est = estimate_rates(state(theta=math.pi - 0.05), state(1, 0.1, theta=-math.pi + 0.05))
    assert est.omega_hat == pytest.approx(1.0)


def test_missing_heading_margin_uses_default():
    explicit = estimate_rates(state(dtheta=H10), state(1, 0.1, dtheta=H10))
    implicit = estimate_rates(state(), state(1, 0.1))
    assert explicit.d_omega == pytest.approx(implicit.d_omega)


def test_zero_interval_and_missing_history():
    with pytest.raises(ZeroInterval):
        estimate_rates(state(), state(1, 0.0))
    with pytest.raises(ZeroInterval):
        check_plausibility(state(t=1.0), state(1, 0.5))
    with pytest.raises(MissingHistory):
        check_plausibility(None, state())


def test_predict_position_examples():
    static = state(x=2.0, y=1.0, dtheta=0.0)
    pred = predict_position(static, RateEstimate(0.0, 0.0, 0.0, 0.0), 0.1)
    assert (pred.x_hat, pred.y_hat, pred.dx_hat, pred.dy_hat) == (2.0, 1.0, 0.0, 0.0)
    mover = state(v=10.0, dtheta=H10)
    pred = predict_position(mover, RateEstimate(0.0, 0.0, 0.0, 0.0), 0.1)
    assert pred.dy_hat >= 10.0 * 0.1 * H10 - 1e-12
    assert pred.dx_hat == pytest.approx(0.0)


def test_check_plausibility_examples():
    still = state(dtheta=0.01, dv=0.1, dx=0.05, dy=0.05)
    assert check_plausibility(still, state(1, 0.05, dtheta=0.01, dv=0.1, dx=0.05, dy=0.05)).plausible

    v = check_plausibility(state(v=5.0, dv=0.1, x=0.0), state(1, 0.05, v=8.0, dv=0.1, x=0.25))
    assert Condition.ACCELERATION in v.violated and not v.plausible

    v = check_plausibility(state(v=0.0, theta=0.0, dtheta=H10), state(1, 0.05, theta=math.pi / 2, dtheta=H10))
    assert Condition.TURN_RATE in v.violated


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(-math.pi, math.pi), st.floats(-7.0, 7.0), st.floats(-1.0, 1.0),
       st.floats(1e-3, 0.1))
def test_expansion_close_to_integrated_ctra(v, theta, a, omega, dt):
    fx, fy = ctra_displacement(dt, v, theta, a, omega)
    rx, ry = ctra_fine(0.0, 0.0, v, theta, a, omega, dt, steps=200)
    assert math.hypot(fx - rx, fy - ry) < 0.01


def test_fine_integrator_oracle_is_converged():
    # the RK4 oracle itself agrees with the closed-form circular arc for a = 0
    v, th, w, dt = 12.0, 0.3, 0.8, 0.1
    rx, ry = ctra_fine(0.0, 0.0, v, th, 0.0, w, dt)
    ex = v / w * (math.sin(th + w * dt) - math.sin(th))
    ey = v / w * (math.cos(th) - math.cos(th + w * dt))
    assert (rx, ry) == pytest.approx((ex, ey), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.0, 30.0), st.floats(-math.pi, math.pi), st.floats(-8.0, 8.0),
       st.floats(-3.0, 3.0))
def test_partials_match_finite_differences(dt, v, theta, a, omega):
    jac = ctra_jacobian(dt, v, theta, a, omega)
    fun = lambda v_, th_, a_, w_: ctra_displacement(dt, v_, th_, a_, w_)  # noqa: E731
    for i in range(4):
        fd = central_diff(fun, [v, theta, a, omega], i)
        np.testing.assert_allclose(jac[:, i], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("v, theta, a, omega, dt", [
    (10.0, 0.4, 1.0, 0.5, 0.1),
    (1.5, -2.0, 0.3, 0.8, 0.05),
    (15.0, 1.2, -3.0, 0.2, 0.05),
    (5.0, 0.0, 0.0, 0.0, 0.1),
])
def test_margins_match_monte_carlo(v, theta, a, omega, dt):
    """First-order margins vs sampled spread of the prediction.

    Inputs are drawn independently with their margins as standard deviations,
    which is the independence assumption the propagation is built on.
    """
    dv, dxy = 1.0, 0.1
    prev = state(x=3.0, y=-2.0, v=v, theta=theta, dv=dv, dx=dxy, dy=dxy, dtheta=H10)
    curr = state(1, dt, v=v + a * dt, theta=theta + omega * dt, dv=dv, dx=dxy, dy=dxy, dtheta=H10)
    est = estimate_rates(prev, curr)
    pred = predict_position(prev, est, dt)

    rng = np.random.default_rng(1)
    n = 100_000
    xs = prev.x + dxy * rng.standard_normal(n)
    ys = prev.y + dxy * rng.standard_normal(n)
    vs = prev.v + dv * rng.standard_normal(n)
    ths = prev.theta + H10 * rng.standard_normal(n)
    as_ = est.a_hat + est.d_a * rng.standard_normal(n)
    ws = est.omega_hat + est.d_omega * rng.standard_normal(n)
    c, s, h = np.cos(ths), np.sin(ths), 0.5 * dt * dt
    px = xs + vs * dt * c + h * (as_ * c - vs * ws * s)
    py = ys + vs * dt * s + h * (as_ * s + vs * ws * c)
    assert pred.dx_hat == pytest.approx(px.std(), rel=0.15)
    assert pred.dy_hat == pytest.approx(py.std(), rel=0.15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 15.0), st.floats(-1.0, 1.0), st.floats(-0.5, 0.5), st.floats(0.0, 2.0), st.floats(0.0, 3.0))
def test_larger_gamma_never_creates_violations(v, dtheta, dpos, g1, extra):
    prev = state(v=v, dx=0.05, dy=0.05, dv=0.5)
    curr = state(1, 0.05, x=v * 0.05 + dpos, y=dpos, v=v, theta=dtheta, dx=0.05, dy=0.05, dv=0.5)
    lo = check_plausibility(prev, curr, PlausibilityParams(gamma_plaus=g1))
    hi = check_plausibility(prev, curr, PlausibilityParams(gamma_plaus=g1 + extra))
    assert hi.violated <= lo.violated


def test_check_stream_first_frames_plausible_without_history():
    s = [state(0, 0.0, v=1.0), state(1, 0.05, x=0.05, v=1.0), state(3, 0.15, x=5.0, v=1.0)]
    out = check_stream(s)
    assert [v.has_history for v in out] == [False, True, False]
    assert all(v.plausible for v in out)


def test_transient_closed_form_examples():
    assert transient_speed_threshold(0.05, SpeedErrorMargins(dv=1.0))[0] == pytest.approx(1.764, abs=1e-3)
    assert transient_speed_threshold(0.0, SpeedErrorMargins(dv=0.0)) == (0.0, 0.0)
    assert min_detectable_speed_error(5.0, 0.05, "Transient", method="closed")[0] == pytest.approx(
        0.35 + math.sqrt(2), abs=1e-9)
    with pytest.raises(ValueError):
        min_detectable_speed_error(5.0, 0.05, "Permanent", method="closed")


def test_permanent_threshold_grows_with_speed():
    lo = min_detectable_speed_error(1.0, 0.1, "Permanent")[0]
    hi = min_detectable_speed_error(10.0, 0.1, "Permanent")[0]
    assert hi > lo


@pytest.mark.parametrize("kind", ["Permanent", "Transient"])
@pytest.mark.parametrize("dt", [0.05, 0.1, 0.5])
def test_negative_errors_no_harder_to_detect(kind, dt):
    for v in (1.0, 5.0, 10.0, 20.0):
        pos, neg = min_detectable_speed_error(v, dt, kind)
        assert neg <= pos + 0.01


def test_permanent_errors_never_fire_acceleration():
    for err in (1.0, 5.0, 20.0):
        prev = state(v=5.0 + err, dv=1.0, dx=0.1, dy=0.1)
        curr = state(1, 0.05, x=0.25, v=5.0 + err, dv=1.0, dx=0.1, dy=0.1)
        assert Condition.ACCELERATION not in check_plausibility(prev, curr).violated
