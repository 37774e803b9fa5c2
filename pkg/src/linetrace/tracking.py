"""Linear Kalman filter and the line-centroid track built on it.

The filter is written functionally: ``predict`` and ``update`` return new
``KalmanState`` values instead of mutating.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .detection import Centroid


class DimensionError(ValueError):
    pass


class SingularInnovationError(np.linalg.LinAlgError):
    """Innovation covariance S = H P- H^T + R cannot be inverted."""


@dataclass(frozen=True)
class KalmanModel:
    A: np.ndarray  # state transition, n x n
    B: np.ndarray  # control input, n x 1
    H: np.ndarray  # measurement, m x n
    Q: np.ndarray  # process noise covariance, n x n
    R: np.ndarray  # measurement noise covariance, m x m

    def __post_init__(self):
        n = self.A.shape[0]
        m = self.H.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {self.B.shape}")
        if self.H.shape != (m, n):
            raise DimensionError(f"H must be {m}x{n}, got {self.H.shape}")
        if self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise DimensionError("Q must be n x n and R m x m")
        if not (np.allclose(self.Q, self.Q.T) and np.allclose(self.R, self.R.T)):
            raise ValueError("Q and R must be symmetric")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class KalmanState:
    x_hat: np.ndarray
    x_hat_prior: np.ndarray
    P: np.ndarray
    P_prior: np.ndarray
    last_gain: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, x0, P0) -> "KalmanState":
        x0 = np.asarray(x0, dtype=float)
        P0 = np.asarray(P0, dtype=float)
        return cls(x0, x0.copy(), P0, P0.copy(), None)


def predict(state: KalmanState, model: KalmanModel, u=None) -> KalmanState:
    """Time update: x- = A x + B u, P- = A P A^T + Q."""
    n = model.n
    if state.x_hat.shape != (n,) or state.P.shape != (n, n):
        raise DimensionError(f"state does not match model dimension {n}")
    x_prior = model.A @ state.x_hat
    if u is not None:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (model.B.shape[1],):
            raise DimensionError(f"control must have {model.B.shape[1]} entries")
        x_prior = x_prior + model.B @ u
    P_prior = model.A @ state.P @ model.A.T + model.Q
    return replace(state, x_hat_prior=x_prior, P_prior=P_prior)


def _gain(P_prior: np.ndarray, H: np.ndarray, R: np.ndarray) -> np.ndarray:
    S = H @ P_prior @ H.T + R
    PHt = P_prior @ H.T
    if not np.all(np.isfinite(S)):
        raise SingularInnovationError("innovation covariance S is not finite")
    if S.shape == (2, 2):
        a, b, c, d = S[0, 0], S[0, 1], S[1, 0], S[1, 1]
        det = a * d - b * c
        if not det > 1e-12 * (abs(a * d) + abs(b * c)):
            raise SingularInnovationError(f"innovation covariance S is singular (det={det:g})")
        S_inv = np.array([[d, -b], [-c, a]]) / det
        return PHt @ S_inv
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance S is not positive definite") from exc
    # K = PHt S^-1  <=>  S K^T = H P-^T
    Y = np.linalg.solve(L, PHt.T)
    return np.linalg.solve(L.T, Y).T


def update(state: KalmanState, model: KalmanModel, z) -> KalmanState:
    """Measurement update with gain K = P- H^T (H P- H^T + R)^-1."""
    z = np.asarray(z, dtype=float)
    if z.shape != (model.m,):
        raise DimensionError(f"measurement must have {model.m} entries, got {z.shape}")
    H = model.H
    K = _gain(state.P_prior, H, model.R)
    innovation = z - H @ state.x_hat_prior
    x_hat = state.x_hat_prior + K @ innovation
    P = (np.eye(model.n) - K @ H) @ state.P_prior
    P = 0.5 * (P + P.T)
    return replace(state, x_hat=x_hat, P=P, last_gain=K)


@dataclass(frozen=True)
class TrackerConfig:
    dt: float = 0.1
    q: float = 1.0
    r: Tuple[float, float] = (25.0, 25.0)
    p0_pos: float = 100.0
    p0_vel: float = 1000.0
    max_coast: int = 15

    def __post_init__(self):
        if self.dt <= 0 or self.q < 0 or min(self.r) <= 0:
            raise ValueError("tracker needs dt > 0, q >= 0 and positive r")
        if self.p0_pos < 0 or self.p0_vel < 0 or self.max_coast < 0:
            raise ValueError("tracker p0 and max_coast must be non-negative")


def constant_velocity_model(cfg: TrackerConfig) -> KalmanModel:
    """State (cx, cy, vx, vy); white-noise acceleration process noise."""
    dt = cfg.dt
    A = np.array([[1, 0, dt, 0],
                  [0, 1, 0, dt],
                  [0, 0, 1, 0],
                  [0, 0, 0, 1]], dtype=float)
    H = np.array([[1, 0, 0, 0],
                  [0, 1, 0, 0]], dtype=float)
    g_pp, g_pv, g_vv = dt ** 4 / 4, dt ** 3 / 2, dt ** 2
    Q = cfg.q * np.array([[g_pp, 0, g_pv, 0],
                          [0, g_pp, 0, g_pv],
                          [g_pv, 0, g_vv, 0],
                          [0, g_pv, 0, g_vv]])
    return KalmanModel(A=A, B=np.zeros((4, 1)), H=H, Q=Q, R=np.diag(np.asarray(cfg.r, dtype=float)))


@dataclass(frozen=True)
class CentroidTrack:
    state: KalmanState
    model: KalmanModel
    coast_count: int
    max_coast: int
    dt: float


@dataclass(frozen=True)
class TrackedCentroid:
    cx: float
    cy: float
    raw: Optional[Centroid]
    valid: bool


def init_from(measurement: Centroid, cfg: TrackerConfig = TrackerConfig()) -> CentroidTrack:
    x0 = np.array([measurement.cx, measurement.cy, 0.0, 0.0])
    P0 = np.diag([cfg.p0_pos, cfg.p0_pos, cfg.p0_vel, cfg.p0_vel]).astype(float)
    return CentroidTrack(KalmanState.initial(x0, P0), constant_velocity_model(cfg),
                         0, cfg.max_coast, cfg.dt)


def track_step(track: CentroidTrack, measurement: Optional[Centroid]
               ) -> Tuple[CentroidTrack, TrackedCentroid]:
    """Advance one frame; returns the new track and its filtered output.

    Without a measurement the prior becomes the posterior (coasting).
    """
    state = predict(track.state, track.model)
    if measurement is not None:
        state = update(state, track.model, (measurement.cx, measurement.cy))
        coast = 0
    else:
        state = replace(state, x_hat=state.x_hat_prior, P=state.P_prior)
        coast = track.coast_count + 1
    new_track = replace(track, state=state, coast_count=coast)
    out = TrackedCentroid(float(state.x_hat[0]), float(state.x_hat[1]), measurement,
                          coast <= track.max_coast)
    return new_track, out
