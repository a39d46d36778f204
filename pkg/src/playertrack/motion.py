"""Constant-velocity Kalman filter over 3D box states.

State layout: ``x, y, z, yaw, l, w, h, vx, vy, vz``. The seven box parameters
are observed directly; velocities are latent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box3D, wrap_angle

STATE_DIM = 10
MEAS_DIM = 7


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)

    def box(self) -> Box3D:
        return Box3D(self.mean[0:3], np.maximum(self.mean[4:7], 1e-3), self.mean[3])

    @property
    def position(self) -> np.ndarray:
        return self.mean[0:3].copy()

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[7:10].copy()

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.covariance.copy())


def kalman_predict(mean, cov, F, Q):
    """Generic linear prediction step."""
    mean = F @ mean
    cov = F @ cov @ F.T + Q
    return mean, 0.5 * (cov + cov.T)


def kalman_update(mean, cov, z, H, R, innovation=None):
    """Generic linear correction step (Joseph form).

    ``innovation`` overrides ``z - H @ mean`` when the caller needs to wrap
    angular components.
    """
    if innovation is None:
        innovation = z - H @ mean
    S = H @ cov @ H.T + R
    PHt = cov @ H.T
    try:
        K = np.linalg.solve(S.T, PHt.T).T
    except np.linalg.LinAlgError:
        K = PHt @ np.linalg.pinv(S, hermitian=True)
    mean = mean + K @ innovation
    A = np.eye(len(mean)) - K @ H
    cov = A @ cov @ A.T + K @ R @ K.T
    return mean, 0.5 * (cov + cov.T)


class BoxKalmanFilter:
    """Constant-velocity filter for 3D boxes.

    Noise levels: ``q_*`` are variance rates per second (scaled by ``dt``);
    ``r_*`` are measurement standard deviations.
    """

    def __init__(self, q_pos=0.01, q_vel=0.1, q_shape=1e-4,
                 r_pos=0.05, r_dims=0.05, r_yaw=0.1, init_vel_var=10.0):
        self.q_pos = q_pos
        self.q_vel = q_vel
        self.q_shape = q_shape
        self.r_pos = r_pos
        self.r_dims = r_dims
        self.r_yaw = r_yaw
        self.init_vel_var = init_vel_var
        self.H = np.zeros((MEAS_DIM, STATE_DIM))
        self.H[np.arange(MEAS_DIM), np.arange(MEAS_DIM)] = 1.0
        self.R = np.diag([r_pos ** 2] * 3 + [r_yaw ** 2] + [r_dims ** 2] * 3)

    def transition(self, dt: float) -> np.ndarray:
        F = np.eye(STATE_DIM)
        F[0, 7] = F[1, 8] = F[2, 9] = dt
        return F

    def process_noise(self, dt: float) -> np.ndarray:
        return np.diag([self.q_pos] * 3 + [self.q_shape] * 4 + [self.q_vel] * 3) * dt

    def initiate(self, box: Box3D) -> KalmanState:
        mean = np.zeros(STATE_DIM)
        mean[:MEAS_DIM] = box.as_array()
        cov = np.zeros((STATE_DIM, STATE_DIM))
        cov[:MEAS_DIM, :MEAS_DIM] = self.R
        cov[7:, 7:] = np.eye(3) * self.init_vel_var
        return KalmanState(mean, cov)

    def _model(self, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if getattr(self, "_cached_dt", None) != dt:
            self._cached = (self.transition(dt), self.process_noise(dt))
            self._cached_dt = dt
        return self._cached

    def predict(self, state: KalmanState, dt: float) -> KalmanState:
        F, Q = self._model(dt)
        mean, cov = kalman_predict(state.mean, state.covariance, F, Q)
        return KalmanState(mean, cov)

    def predict_many(self, states: list, dt: float) -> list:
        """Batched :meth:`predict` over a list of states."""
        F, Q = self._model(dt)
        if not states:
            return []
        means = np.stack([st.mean for st in states]) @ F.T
        P = F @ np.stack([st.covariance for st in states]) @ F.T + Q
        P = 0.5 * (P + P.transpose(0, 2, 1))
        return [KalmanState(m, c) for m, c in zip(means, P)]

    def update(self, state: KalmanState, measurement: Box3D) -> KalmanState:
        z = measurement.as_array()
        P = state.covariance
        innov = z - state.mean[:MEAS_DIM]
        innov[3] = (innov[3] + np.pi) % (2.0 * np.pi) - np.pi
        # H selects the first MEAS_DIM state entries, so H P H^T and P H^T are slices
        S = P[:MEAS_DIM, :MEAS_DIM] + self.R
        PHt = P[:, :MEAS_DIM]
        try:
            K = np.linalg.solve(S, PHt.T).T
        except np.linalg.LinAlgError:
            K = PHt @ np.linalg.pinv(S, hermitian=True)
        mean = state.mean + K @ innov
        A = np.eye(STATE_DIM)
        A[:, :MEAS_DIM] -= K
        cov = A @ P @ A.T + K @ self.R @ K.T
        mean[3] = (mean[3] + np.pi) % (2.0 * np.pi) - np.pi
        return KalmanState(mean, 0.5 * (cov + cov.T))

    def update_many(self, states: list, measurements: np.ndarray) -> list:
        """Batched :meth:`update` of ``states`` against ``(N, 7)`` box rows."""
        if not states:
            return []
        z = np.asarray(measurements, dtype=float).reshape(len(states), MEAS_DIM)
        means = np.stack([st.mean for st in states])
        P = np.stack([st.covariance for st in states])
        innov = z - means[:, :MEAS_DIM]
        innov[:, 3] = (innov[:, 3] + np.pi) % (2.0 * np.pi) - np.pi
        S = P[:, :MEAS_DIM, :MEAS_DIM] + self.R
        PHt = P[:, :, :MEAS_DIM]
        try:
            K = np.linalg.solve(S, PHt.transpose(0, 2, 1)).transpose(0, 2, 1)
        except np.linalg.LinAlgError:
            return [self.update(st, Box3D.from_array(row)) for st, row in zip(states, z)]
        means = means + np.einsum("nij,nj->ni", K, innov)
        A = np.broadcast_to(np.eye(STATE_DIM), P.shape).copy()
        A[:, :, :MEAS_DIM] -= K
        cov = A @ P @ A.transpose(0, 2, 1) + K @ self.R @ K.transpose(0, 2, 1)
        cov = 0.5 * (cov + cov.transpose(0, 2, 1))
        means[:, 3] = (means[:, 3] + np.pi) % (2.0 * np.pi) - np.pi
        return [KalmanState(m, c) for m, c in zip(means, cov)]
