import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vehctl import lpv
from vehctl.lpv import SchedulingVector, build_continuous, discretize
from vehctl.plant import VehicleParams
from oracles import exact_discretization

P = VehicleParams()


def rho(v=15.0, cf=80_000.0, cr=80_000.0):
    return SchedulingVector.from_stiffness(v, cf, cr)


def test_a11_hand_value():
    A, _, _ = build_continuous(rho(), P)
    assert A[0, 0] == pytest.approx(-2 * 160_000 / (1575 * 15))
    assert A[0, 0] == pytest.approx(-13.54, abs=0.005)


def test_symmetric_vehicle_decouples():
    sym = VehicleParams(a=1.4, b=1.4)
    A, _, _ = build_continuous(rho(cf=70_000, cr=70_000), sym)
    assert A[0, 2] == pytest.approx(-15.0)
    assert A[2, 0] == pytest.approx(0.0, abs=1e-12)


def test_kinematic_rows():
    A, B, C = build_continuous(rho(v=12.0), P)
    np.testing.assert_array_equal(A[1], [0, 0, 1, 0])
    np.testing.assert_array_equal(A[3], [1, 12.0, 0, 0])
    np.testing.assert_array_equal(C, [[0, 0, 0, 1], [0, 1, 0, 0]])
    assert B[1, 0] == 0 and B[3, 0] == 0


def test_b_linear_in_cf():
    _, B1, _ = build_continuous(rho(cf=50_000), P)
    _, B2, _ = build_continuous(rho(cf=100_000), P)
    np.testing.assert_array_equal(B2, 2 * B1)


@settings(max_examples=50)
@given(st.floats(1, 40), st.floats(1e4, 2e5), st.floats(1e4, 2e5),
       st.floats(1, 40), st.floats(1e4, 2e5), st.floats(1e4, 2e5))
def test_affine_in_rho(v1, cf1, cr1, v2, cf2, cr2):
    r1, r2 = rho(v1, cf1, cr1), rho(v2, cf2, cr2)
    mid = SchedulingVector(*((r1.as_array() + r2.as_array()) / 2))
    A1, B1, C1 = build_continuous(r1, P)
    A2, B2, C2 = build_continuous(r2, P)
    Am, Bm, Cm = build_continuous(mid, P)
    scale = max(np.abs(A1).max(), np.abs(A2).max())
    np.testing.assert_allclose(A1 + A2 - 2 * Am, 0.0, atol=1e-12 * scale)
    np.testing.assert_allclose(B1 + B2 - 2 * Bm, 0.0, atol=1e-9)
    np.testing.assert_array_equal(C1, Cm)


def test_pure():
    a = build_continuous(rho(), P)
    b = build_continuous(rho(), P)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_scheduling_floor_and_clamp():
    with pytest.raises(lpv.SchedulingError):
        SchedulingVector.from_stiffness(0.4, 8e4, 8e4)
    r = SchedulingVector.from_stiffness(10.0, 1e3, 5e5)
    assert r.c_f == 1e4
    assert r.cr_over_vx == pytest.approx(2e5 / 10)
    with pytest.raises(lpv.SchedulingError):
        build_continuous(SchedulingVector(0.1, 1.0, 1.0, 1e4), P)


def test_euler_exact():
    A, B, C = build_continuous(rho(), P)
    inst = discretize(A, B, C, 0.1)
    np.testing.assert_array_equal(inst.A_d, np.eye(4) + 0.1 * A)
    np.testing.assert_array_equal(inst.B_d, 0.1 * B)
    assert inst.A_d[0, 0] == 1 + 0.1 * A[0, 0]
    small = discretize(A, B, C, 1e-12)
    np.testing.assert_allclose(small.A_d, np.eye(4), atol=1e-9)
    np.testing.assert_allclose(small.B_d, 0.0, atol=1e-6)
    with pytest.raises(ValueError):
        discretize(A, B, C, 0.0)


def test_euler_error_is_second_order():
    A, B, C = build_continuous(rho(), P)
    errs = []
    for T in (0.01, 0.005):
        Ae, Be = exact_discretization(A, B, T)
        inst = discretize(A, B, C, T)
        errs.append(max(np.abs(inst.A_d - Ae).max(), np.abs(inst.B_d - Be).max() / 1e3))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_adapted_instance_fresh():
    inst = lpv.adapted_instance(20.0, 6e4, 8e4, P, 0.1)
    A, B, _ = build_continuous(rho(20.0, 6e4, 8e4), P)
    np.testing.assert_array_equal(inst.A_c, A)
    assert inst.T_s == 0.1
