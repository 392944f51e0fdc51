import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vehctl import envelope
from vehctl.envelope import RoadPoint, plan_speed, steer_limit, v_max
from vehctl.plant import VehicleParams

P = VehicleParams()


def test_v_max_examples():
    assert v_max(RoadPoint(0.0, 0.01, 0.0, 0.95)) == pytest.approx(math.sqrt(9.81 * 0.95 / 0.01))
    assert v_max(RoadPoint(0.0, 0.01, 0.0, 0.95)) == pytest.approx(30.53, abs=0.005)
    assert v_max(RoadPoint(0.0, 0.0, 0.0, 0.95)) == math.inf
    assert v_max(RoadPoint(0.0, -0.04, 0.0, 0.8)) == pytest.approx(math.sqrt(9.81 * 0.8 / 0.04))


def test_v_max_scaling():
    a = v_max(RoadPoint(0, 0.01, 0, 0.9))
    b = v_max(RoadPoint(0, 0.04, 0, 0.9))
    assert a / b == pytest.approx(2.0)


def test_camber_domain():
    with pytest.raises(envelope.EnvelopeDomainError):
        v_max(RoadPoint(0.0, 0.01, 2.0, 0.6))


def test_steer_limit_zero_speed():
    lim = steer_limit(0.0, P)
    assert lim == pytest.approx(math.atan(2.8 * math.tan(math.radians(10.0)) / 1.6), rel=1e-14)
    assert math.degrees(lim) == pytest.approx(17.2, abs=0.06)
    assert lim == pytest.approx(0.300, abs=0.001)


def test_raw_limit_root():
    v0 = math.sqrt(400.0 / 7.0)
    assert envelope.steer_limit_raw(v0, P) == pytest.approx(0.0, abs=1e-12)
    assert envelope.steer_limit_raw(15.0, P) < 0
    assert steer_limit(15.0, P) == pytest.approx(math.atan(2.8 * math.tan(math.radians(1.5)) / 1.6))


def test_steer_limit_monotone_and_clamped():
    vs = np.linspace(0, 40, 400)
    lims = [steer_limit(v, P) for v in vs]
    assert all(a >= b for a, b in zip(lims, lims[1:]))
    assert steer_limit(0.0, P, u_max=0.1) == 0.1
    with pytest.raises(ValueError):
        steer_limit(-1.0, P)


def test_plan_speed_straight_unchanged():
    s = np.linspace(0, 100, 101)
    req = 20 + 2 * np.sin(s / 50)
    np.testing.assert_array_equal(plan_speed(s, req, np.zeros_like(s)), req)


def test_plan_speed_curve_ramp():
    s = np.arange(0, 300.0, 0.5)
    curv = np.where((s > 200) & (s < 250), 0.05, 0.0)
    out = plan_speed(s, np.full_like(s, 25.0), curv)
    vc = math.sqrt(9.81 * 0.95 / 0.05)
    assert vc == pytest.approx(13.65, abs=0.005)
    assert out[(s > 200) & (s < 250)].max() == pytest.approx(vc)
    dec = (out[:-1] ** 2 - out[1:] ** 2) / (2 * 0.5)
    assert dec.max() <= 3.0 + 1e-9
    assert out[0] == 25.0
    assert np.any((out < 25.0) & (s < 200))


@given(st.lists(st.floats(-0.1, 0.1), min_size=2, max_size=60), st.floats(5, 40))
def test_plan_speed_below_limit(curv, req):
    curv = np.array(curv)
    s = np.arange(curv.size, dtype=float)
    out = plan_speed(s, np.full(curv.size, req), curv)
    assert np.all(out <= envelope.v_max_array(curv) + 1e-12)
