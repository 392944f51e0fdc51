import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vehctl.rls import CorneringStiffnessRls, RlsInputError
from oracles import batch_least_squares, regularized_least_squares

CF, CR = 80_000.0, 75_000.0


def excitation(rng, n):
    mag = rng.uniform(0.005, 0.05, size=(n, 2))
    return mag * rng.choice([-1.0, 1.0], size=(n, 2))


def test_noise_free_convergence():
    rng = np.random.default_rng(0)
    est = CorneringStiffnessRls(lam=1.0)
    for a in excitation(rng, 50):
        est.update(a * [CF, CR], a)
    assert abs(est.c_f / CF - 1) < 1e-3
    assert abs(est.c_r / CR - 1) < 1e-3


def test_noisy_matches_regularized_least_squares():
    rng = np.random.default_rng(1)
    alphas = excitation(rng, 200)
    z = alphas * [CF, CR] + rng.normal(0, 50.0, size=alphas.shape)
    est = CorneringStiffnessRls(lam=1.0)
    for a, f in zip(alphas, z):
        est.update(f, a)
    for ch, c_hat in enumerate((est.c_f, est.c_r)):
        ref = regularized_least_squares(alphas[:, ch], z[:, ch], 80_000.0, 1e6)
        assert c_hat == pytest.approx(ref, rel=1e-9)


def test_noisy_matches_batch_with_flat_prior():
    rng = np.random.default_rng(2)
    alphas = excitation(rng, 200)
    z = alphas * [CF, CR] + rng.normal(0, 50.0, size=alphas.shape)
    est = CorneringStiffnessRls(lam=1.0, p0=1e10)
    for a, f in zip(alphas, z):
        est.update(f, a)
    assert est.c_f == pytest.approx(batch_least_squares(alphas[:, 0], z[:, 0]), rel=1e-6)
    assert est.c_r == pytest.approx(batch_least_squares(alphas[:, 1], z[:, 1]), rel=1e-6)


def test_zero_slip_skipped():
    est = CorneringStiffnessRls()
    P0 = est.P.copy()
    est.update([100.0, -50.0], [0.0, 0.0])
    np.testing.assert_array_equal(est.theta, [80_000.0, 80_000.0])
    np.testing.assert_array_equal(est.P, P0)
    assert est.n_updates == 0


def test_dead_band_per_channel():
    est = CorneringStiffnessRls()
    est.update([0.02 * 60_000.0, 1.0], [0.02, 5e-4])
    assert est.c_r == 80_000.0
    assert est.c_f < 80_000.0


def test_exact_after_two_updates_without_forgetting():
    est = CorneringStiffnessRls(lam=1.0, p0=1e14, reset_trace=1e30)
    for a in ([0.01, -0.02], [0.03, 0.015]):
        est.update(np.array(a) * [CF, CR], a)
    assert est.c_f == pytest.approx(CF, rel=1e-8)
    assert est.c_r == pytest.approx(CR, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.9, 1.0))
def test_covariance_spd_and_bounds(seed, lam):
    rng = np.random.default_rng(seed)
    est = CorneringStiffnessRls(lam=lam)
    for _ in range(60):
        a = rng.normal(0, 0.03, 2)
        f = rng.normal(0, 1e5, 2)  # wildly inconsistent data
        est.update(f, a)
        np.linalg.cholesky(est.P)
        assert 1e4 <= est.c_f <= 2e5 and 1e4 <= est.c_r <= 2e5


def test_blow_up_resets():
    est = CorneringStiffnessRls(lam=0.5)
    resets = [est.update([0.01 * CF, 0.0], [0.01, 0.0]) for _ in range(30)]
    assert any(resets)
    assert np.trace(est.P) <= 1e12


@pytest.mark.parametrize("f,a", [([np.nan, 0], [0.01, 0.01]), ([0, 0], [np.inf, 0.01]),
                                 ([0, 0, 0], [0.01, 0.01])])
def test_bad_input(f, a):
    with pytest.raises(RlsInputError):
        CorneringStiffnessRls().update(f, a)


def test_bad_forgetting_factor():
    for lam in (0.0, 1.5):
        with pytest.raises(ValueError):
            CorneringStiffnessRls(lam=lam)
