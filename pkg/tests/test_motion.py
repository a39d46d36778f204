import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from playertrack.geometry import Box3D
from playertrack.motion import BoxKalmanFilter, KalmanState, kalman_predict, kalman_update


def state_with_velocity(v, x=(0.0, 0.0, 0.9)):
    kf = BoxKalmanFilter()
    st_ = kf.initiate(Box3D(x, [0.6, 0.6, 1.8], 0.0))
    st_.mean[7:10] = v
    return kf, st_


def test_predict_constant_velocity_step():
    kf, s = state_with_velocity([1.0, 0.0, 0.0])
    out = kf.predict(s, 0.1)
    assert out.mean[0] - s.mean[0] == pytest.approx(0.1, abs=1e-15)
    assert np.array_equal(out.mean[3:7], s.mean[3:7])


def test_predict_zero_velocity_grows_covariance():
    kf, s = state_with_velocity([0.0, 0.0, 0.0])
    out = kf.predict(s, 0.1)
    assert np.array_equal(out.mean[:3], s.mean[:3])
    assert np.all(np.diag(out.covariance) > np.diag(s.covariance))


def test_predict_compounds():
    kf, s = state_with_velocity([2.0, 0.0, 0.0])
    for _ in range(10):
        s = kf.predict(s, 0.1)
    assert s.mean[0] == pytest.approx(2.0, abs=1e-9)


def test_predict_rejects_nonpositive_dt():
    kf, s = state_with_velocity([0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        kf.predict(s, 0.0)


def test_update_zero_noise_limit_hits_measurement():
    kf = BoxKalmanFilter(r_pos=1e-9, r_dims=1e-9, r_yaw=1e-9)
    s = kf.predict(kf.initiate(Box3D([0, 0, 0.9], [0.6, 0.6, 1.8])), 0.1)
    z = Box3D([0.3, -0.2, 1.0], [0.7, 0.5, 1.7], 0.4)
    out = kf.update(s, z)
    assert np.allclose(out.mean[:7], z.as_array(), atol=1e-6)


def test_update_at_predicted_mean_keeps_mean():
    kf, s = state_with_velocity([1.0, 0.5, 0.0])
    s = kf.predict(s, 0.1)
    out = kf.update(s, s.box())
    assert np.allclose(out.mean, s.mean, atol=1e-12)


def test_scalar_filter_two_steps_by_hand():
    # position/velocity filter, dt = 1, P0 = I, Q = 0, R = 1, z = 1 then 2
    F = np.array([[1.0, 1.0], [0.0, 1.0]])
    H = np.array([[1.0, 0.0]])
    R = np.array([[1.0]])
    Q = np.zeros((2, 2))
    m, P = np.zeros(2), np.eye(2)
    m, P = kalman_predict(m, P, F, Q)
    m, P = kalman_update(m, P, np.array([1.0]), H, R)
    assert np.allclose(m, [2 / 3, 1 / 3], atol=1e-9)
    assert np.allclose(P, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-9)
    m, P = kalman_predict(m, P, F, Q)
    assert np.allclose(P, [[2, 1], [1, 2 / 3]], atol=1e-9)
    m, P = kalman_update(m, P, np.array([2.0]), H, R)
    assert np.allclose(m, [5 / 3, 2 / 3], atol=1e-9)
    assert np.allclose(P, [[2 / 3, 1 / 3], [1 / 3, 1 / 3]], atol=1e-9)


def test_box_update_matches_generic_form(rng):
    kf = BoxKalmanFilter()
    for _ in range(20):
        s = kf.initiate(Box3D(rng.normal(0, 3, 3), rng.uniform(0.3, 2, 3), rng.uniform(-3, 3)))
        s.mean[7:] = rng.normal(0, 2, 3)
        s = kf.predict(s, 0.1)
        z = Box3D(s.mean[:3] + rng.normal(0, 0.2, 3), rng.uniform(0.3, 2, 3), rng.uniform(-3, 3))
        innov = z.as_array() - s.mean[:7]
        innov[3] = (innov[3] + np.pi) % (2 * np.pi) - np.pi
        m, P = kalman_update(s.mean, s.covariance, z.as_array(), kf.H, kf.R, innov)
        m[3] = (m[3] + np.pi) % (2 * np.pi) - np.pi
        out = kf.update(s, z)
        assert np.allclose(out.mean, m, atol=1e-10)
        assert np.allclose(out.covariance, P, atol=1e-10)


def test_batched_update_matches_single(rng):
    kf = BoxKalmanFilter()
    states, meas = [], []
    for _ in range(7):
        s = kf.predict(kf.initiate(Box3D(rng.normal(0, 3, 3), rng.uniform(0.3, 2, 3))), 0.1)
        states.append(s)
        meas.append(Box3D(s.mean[:3] + rng.normal(0, 0.1, 3), rng.uniform(0.3, 2, 3),
                          rng.uniform(-3, 3)).as_array())
    batched = kf.update_many(states, np.array(meas))
    for s, z, b in zip(states, meas, batched):
        single = kf.update(s, Box3D.from_array(z))
        assert np.allclose(single.mean, b.mean, atol=1e-12)
        assert np.allclose(single.covariance, b.covariance, atol=1e-12)
    assert kf.update_many([], np.zeros((0, 7))) == []


def test_yaw_innovation_wraps():
    kf = BoxKalmanFilter()
    s = kf.initiate(Box3D([0, 0, 0], [1, 1, 1], np.pi - 0.05))
    out = kf.update(s, Box3D([0, 0, 0], [1, 1, 1], -np.pi + 0.05))
    # the short way round crosses +-pi rather than sweeping through zero
    assert abs(out.mean[3]) > np.pi - 0.06


def test_random_walk_keeps_covariance_symmetric_and_trace_shrinks_on_update():
    rng = np.random.default_rng(3)
    kf = BoxKalmanFilter()
    s = kf.initiate(Box3D([0, 0, 0.9], [0.6, 0.6, 1.8]))
    for _ in range(1000):
        s = kf.predict(s, float(rng.uniform(0.02, 0.3)))
        assert np.max(np.abs(s.covariance - s.covariance.T)) < 1e-9
        z = Box3D(s.mean[:3] + rng.normal(0, 0.3, 3), np.abs(s.mean[4:7]) + 0.01,
                  float(rng.uniform(-3, 3)))
        before = np.trace(s.covariance)
        s = kf.update(s, z)
        assert np.trace(s.covariance) <= before + 1e-12
        assert np.max(np.abs(s.covariance - s.covariance.T)) < 1e-9
        assert np.all(np.diag(s.covariance) >= 0)


def test_noiseless_tracking_converges():
    kf = BoxKalmanFilter(q_pos=0, q_vel=0, q_shape=0, r_pos=0, r_dims=0, r_yaw=0)
    v = np.array([1.5, -0.7, 0.0])
    start = np.array([2.0, 3.0, 0.9])
    s = kf.initiate(Box3D(start, [0.6, 0.6, 1.8]))
    for k in range(1, 51):
        s = kf.predict(s, 0.1)
        s = kf.update(s, Box3D(start + v * 0.1 * k, [0.6, 0.6, 1.8]))
    assert np.linalg.norm(s.mean[:3] - (start + v * 5.0)) < 1e-6
    assert np.allclose(s.mean[7:], v, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.01, 1.0))
def test_update_never_increases_trace(offset, dt):
    kf = BoxKalmanFilter()
    s = kf.predict(kf.initiate(Box3D([0, 0, 0.9], [0.6, 0.6, 1.8])), dt)
    out = kf.update(s, Box3D(np.array(offset) + [0, 0, 0.9], [0.6, 0.6, 1.8]))
    assert np.trace(out.covariance) <= np.trace(s.covariance) + 1e-12


def test_state_box_and_copy():
    s = KalmanState(np.r_[1, 2, 3, 0.5, 1, 1, 1, 0, 0, 0], np.eye(10))
    c = s.copy()
    c.mean[0] = 9
    assert s.mean[0] == 1
    assert s.box().center.tolist() == [1, 2, 3]
    assert np.array_equal(s.velocity, np.zeros(3))
