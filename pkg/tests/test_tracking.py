import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linetrace.detection import Centroid
from linetrace.tracking import (
    DimensionError,
    KalmanModel,
    KalmanState,
    SingularInnovationError,
    TrackerConfig,
    constant_velocity_model,
    init_from,
    predict,
    track_step,
    update,
)

from oracles import kalman_step_oracle

# steady-state gain of the scalar filter A=H=Q=R=1: the prior variance p
# solves p^2 - p - 1 = 0, so K = p / (p + 1) = (sqrt(5) - 1) / 2
SCALAR_STEADY_GAIN = 0.6180339887498949


def scalar_model(q=1.0, r=1.0):
    one = np.eye(1)
    return KalmanModel(A=one, B=np.zeros((1, 1)), H=one, Q=q * one, R=r * one)


def random_spd(rng, n, scale=1.0):
    m = rng.normal(size=(n, n))
    return scale * (m @ m.T + n * np.eye(n))


# --- predict / update -------------------------------------------------------

def test_predict_identity_dynamics():
    model = KalmanModel(A=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2), Q=np.zeros((2, 2)), R=np.eye(2))
    st0 = KalmanState.initial([3.0, 4.0], np.eye(2))
    out = predict(st0, model)
    np.testing.assert_array_equal(out.x_hat_prior, [3, 4])
    np.testing.assert_array_equal(out.P_prior, np.eye(2))
    # posterior fields carried forward
    np.testing.assert_array_equal(out.x_hat, st0.x_hat)
    np.testing.assert_array_equal(out.P, st0.P)


def test_predict_constant_velocity_unit_dt():
    model = constant_velocity_model(TrackerConfig(dt=1.0))
    out = predict(KalmanState.initial([0, 0, 1, 1], np.eye(4)), model)
    np.testing.assert_array_equal(out.x_hat_prior, [1, 1, 1, 1])


def test_predict_control_term():
    model = KalmanModel(A=np.eye(2), B=np.array([[1.0], [2.0]]), H=np.eye(2),
                        Q=np.zeros((2, 2)), R=np.eye(2))
    out = predict(KalmanState.initial([0, 0], np.eye(2)), model, u=[0.5])
    np.testing.assert_allclose(out.x_hat_prior, [0.5, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_predict_covariance_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    Q = random_spd(rng, 4, 0.1)
    P = random_spd(rng, 4)
    model = KalmanModel(A=A, B=np.zeros((4, 1)), H=np.eye(2, 4), Q=Q, R=np.eye(2))
    out = predict(KalmanState.initial(np.zeros(4), P), model)
    expected = A @ P @ A.T + Q
    np.testing.assert_allclose(out.P_prior, expected, rtol=1e-9, atol=1e-12)


def test_update_ignores_measurement_with_huge_noise():
    model = KalmanModel(A=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2), Q=np.eye(2),
                        R=1e12 * np.eye(2))
    s = predict(KalmanState.initial([1.0, 2.0], np.eye(2)), model)
    out = update(s, model, [100.0, -50.0])
    assert np.abs(out.last_gain).max() < 1e-10
    np.testing.assert_allclose(out.x_hat, s.x_hat_prior, atol=1e-8)


def test_update_follows_perfect_measurement():
    model = KalmanModel(A=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2), Q=np.eye(2),
                        R=1e-12 * np.eye(2))
    s = predict(KalmanState.initial([1.0, 2.0], np.eye(2)), model)
    out = update(s, model, [7.0, -3.0])
    np.testing.assert_allclose(out.x_hat, [7.0, -3.0], atol=1e-9)


def test_scalar_riccati_converges_to_frozen_gain():
    model = scalar_model()
    s = KalmanState.initial([0.0], np.eye(1))
    gains = []
    for _ in range(100):
        s = update(predict(s, model), model, [0.0])
        gains.append(float(s.last_gain[0, 0]))
    assert abs(gains[-1] - gains[-2]) < 1e-10
    assert gains[-1] == pytest.approx(SCALAR_STEADY_GAIN, abs=1e-12)
    assert gains[-1] == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)


def test_singular_innovation_is_reported():
    model = KalmanModel(A=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2), Q=np.zeros((2, 2)),
                        R=np.zeros((2, 2)))
    s = predict(KalmanState.initial([0.0, 0.0], np.zeros((2, 2))), model)
    with pytest.raises(SingularInnovationError):
        update(s, model, [1.0, 1.0])


def test_singular_innovation_general_dimension():
    H = np.eye(3)
    model = KalmanModel(A=np.eye(3), B=np.zeros((3, 1)), H=H, Q=np.zeros((3, 3)), R=np.zeros((3, 3)))
    s = predict(KalmanState.initial(np.zeros(3), np.zeros((3, 3))), model)
    with pytest.raises(SingularInnovationError):
        update(s, model, np.ones(3))


def test_general_dimension_update_matches_oracle():
    rng = np.random.default_rng(4)
    n, m = 5, 3
    A = rng.normal(size=(n, n)) * 0.5
    H = rng.normal(size=(m, n))
    Q, R, P = random_spd(rng, n, 0.1), random_spd(rng, m), random_spd(rng, n)
    model = KalmanModel(A=A, B=np.zeros((n, 1)), H=H, Q=Q, R=R)
    x = rng.normal(size=n)
    z = rng.normal(size=m)
    out = update(predict(KalmanState.initial(x, P), model), model, z)
    _, _, K, x_post, P_post, _ = kalman_step_oracle(x, P, A, H, Q, R, z)
    np.testing.assert_allclose(out.last_gain, K, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(out.x_hat, x_post, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(out.P, 0.5 * (P_post + P_post.T), rtol=1e-9, atol=1e-12)


def test_dimension_errors():
    with pytest.raises(DimensionError):
        KalmanModel(A=np.eye(3), B=np.zeros((2, 1)), H=np.eye(2, 3), Q=np.eye(3), R=np.eye(2))
    with pytest.raises(DimensionError):
        KalmanModel(A=np.ones((2, 3)), B=np.zeros((2, 1)), H=np.eye(2), Q=np.eye(2), R=np.eye(2))
    model = constant_velocity_model(TrackerConfig())
    with pytest.raises(DimensionError):
        predict(KalmanState.initial(np.zeros(3), np.eye(3)), model)
    s = predict(KalmanState.initial(np.zeros(4), np.eye(4)), model)
    with pytest.raises(DimensionError):
        update(s, model, [1.0, 2.0, 3.0])


def test_asymmetric_noise_rejected():
    with pytest.raises(ValueError):
        KalmanModel(A=np.eye(2), B=np.zeros((2, 1)), H=np.eye(2),
                    Q=np.array([[1.0, 0.5], [0.0, 1.0]]), R=np.eye(2))


# --- properties -------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_update_properties(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4)) * 0.6
    H = rng.normal(size=(2, 4))
    Q, R, P = random_spd(rng, 4, 0.05), random_spd(rng, 2), random_spd(rng, 4)
    model = KalmanModel(A=A, B=np.zeros((4, 1)), H=H, Q=Q, R=R)
    s = predict(KalmanState.initial(rng.normal(size=4), P), model)
    out = update(s, model, rng.normal(size=2))
    # covariance shrinks, stays exactly symmetric, and agrees with Joseph form
    assert np.trace(out.P) <= np.trace(s.P_prior) + 1e-9
    np.testing.assert_array_equal(out.P, out.P.T)
    assert (np.diag(out.P) >= 0).all()
    K = out.last_gain
    I_KH = np.eye(4) - K @ H
    joseph = I_KH @ s.P_prior @ I_KH.T + K @ R @ K.T
    np.testing.assert_allclose(out.P, joseph, rtol=1e-8, atol=1e-10 * np.abs(joseph).max())


def test_no_process_noise_and_ignored_measurements_propagate_model():
    cfg = TrackerConfig(q=0.0, r=(1e14, 1e14))
    track = init_from(Centroid(10.0, 20.0), cfg)
    x0 = track.state.x_hat.copy()
    x0[2:] = [3.0, -2.0]
    track = type(track)(type(track.state).initial(x0, track.state.P), track.model, 0, 15, cfg.dt)
    A = track.model.A
    expected = x0.copy()
    rng = np.random.default_rng(0)
    for _ in range(50):
        track, out = track_step(track, Centroid(*rng.uniform(-500, 500, 2)))
        expected = A @ expected
    np.testing.assert_allclose(track.state.x_hat, expected, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-20, 20).filter(lambda c: abs(c) > 1e-3))
def test_filter_is_linear(seed, c):
    rng = np.random.default_rng(seed)
    zs = rng.normal(0, 50, size=(30, 2))
    model = constant_velocity_model(TrackerConfig())
    x0, P0 = np.array([zs[0, 0], zs[0, 1], 0, 0]), np.diag([100.0, 100, 1000, 1000])
    a = KalmanState.initial(x0, P0)
    b = KalmanState.initial(c * x0, P0)
    for z in zs:
        a = update(predict(a, model), model, z)
        b = update(predict(b, model), model, c * z)
        np.testing.assert_allclose(b.x_hat, c * a.x_hat, rtol=1e-9, atol=1e-9 * abs(c) * 100)


# --- centroid track ---------------------------------------------------------

def test_init_from_examples():
    cfg = TrackerConfig()
    track = init_from(Centroid(50, 60), cfg)
    np.testing.assert_array_equal(track.state.x_hat, [50, 60, 0, 0])
    P = track.state.P
    np.testing.assert_array_equal(P, P.T)
    assert (np.linalg.eigvalsh(P) >= 0).all()
    assert track.coast_count == 0


def test_default_transition_matrix():
    dt = TrackerConfig().dt
    expected = np.array([[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]], float)
    model = constant_velocity_model(TrackerConfig())
    np.testing.assert_array_equal(model.A, expected)
    np.testing.assert_array_equal(model.H, [[1, 0, 0, 0], [0, 1, 0, 0]])
    np.testing.assert_array_equal(model.R, np.diag([25.0, 25.0]))


def test_first_measurement_passes_through():
    track = init_from(Centroid(100, 120))
    track, out = track_step(track, Centroid(100, 120))
    assert out.cx == pytest.approx(100) and out.cy == pytest.approx(120)
    assert out.valid and out.raw == Centroid(100, 120)


def test_coasting_follows_constant_velocity():
    track = init_from(Centroid(0, 0))
    for k in range(1, 40):
        track, _ = track_step(track, Centroid(2.0 * k, -1.0 * k))
    x = track.state.x_hat.copy()
    A = track.model.A
    for _ in range(3):
        track, out = track_step(track, None)
    expected = np.linalg.matrix_power(A, 3) @ x
    np.testing.assert_allclose(track.state.x_hat, expected, rtol=1e-12)
    assert out.raw is None and track.coast_count == 3


def test_track_invalid_after_max_coast_and_reset_on_measurement():
    cfg = TrackerConfig(max_coast=4)
    track = init_from(Centroid(5, 5), cfg)
    valid = []
    for _ in range(6):
        track, out = track_step(track, None)
        valid.append(out.valid)
    assert valid == [True, True, True, True, False, False]
    track, out = track_step(track, Centroid(5, 5))
    assert out.valid and track.coast_count == 0


def test_filter_smooths_noisy_sweep():
    rng = np.random.default_rng(2024)
    n = 500
    truth = 100 + 0.8 * np.arange(n)
    raw = truth + rng.normal(0, 5, n)
    track = init_from(Centroid(raw[0], 240.0))
    filt = []
    for z in raw:
        track, out = track_step(track, Centroid(z, 240.0))
        filt.append(out.cx)
    filt = np.array(filt)
    assert np.var(np.diff(filt)) <= 0.5 * np.var(np.diff(raw))
    assert np.sqrt(np.mean((filt - truth) ** 2)) <= np.sqrt(np.mean((raw - truth) ** 2))
