"""Constant-velocity Kalman filtering of 2-D point targets.

State layout is [x, y, vx, vy] with a fixed one-frame time step. Positions
are image pixels, velocities pixels per frame. All operations are pure:
they take a state and return a new one.
"""

from dataclasses import dataclass

import numpy as np

from .cmc import AffineTransform
from .errors import ConfigError, InvalidInputError

# one-frame constant-velocity transition and position-only measurement
_F = np.array([
    [1.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
])
_H = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
])


@dataclass(frozen=True)
class MotionConfig:
    """Noise model of the point filter (pixel / pixel-per-frame units)."""

    process_noise_pos: float = 1.0
    process_noise_vel: float = 0.25
    measurement_noise: float = 1.0
    initial_pos_var: float = 10.0
    initial_vel_var: float = 100.0

    def __post_init__(self):
        for name in ("process_noise_pos", "process_noise_vel",
                     "measurement_noise", "initial_pos_var", "initial_vel_var"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {v}")


@dataclass(frozen=True)
class KalmanState:
    """Gaussian belief over [x, y, vx, vy]."""

    mean: np.ndarray        # shape (4,)
    covariance: np.ndarray  # shape (4, 4), symmetric PSD

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[2:]


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return (p + p.T) / 2.0


def init_state(measurement, config: MotionConfig) -> KalmanState:
    """Start a new filter at a measured position with zero velocity."""
    z = np.asarray(measurement, dtype=float).reshape(2)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError(f"non-finite measurement {measurement!r}")
    mean = np.array([z[0], z[1], 0.0, 0.0])
    cov = np.diag([config.initial_pos_var, config.initial_pos_var,
                   config.initial_vel_var, config.initial_vel_var])
    return KalmanState(mean, cov)


def predict(state: KalmanState, config: MotionConfig) -> KalmanState:
    """One-frame constant-velocity prediction."""
    q = np.diag([config.process_noise_pos, config.process_noise_pos,
                 config.process_noise_vel, config.process_noise_vel])
    mean = _F @ state.mean
    cov = _symmetrize(_F @ state.covariance @ _F.T + q)
    return KalmanState(mean, cov)


def update(state: KalmanState, measurement, config: MotionConfig) -> KalmanState:
    """Correct the state with a position measurement.

    Uses the Joseph-form covariance update, which keeps the covariance
    symmetric and PSD under roundoff.
    """
    z = np.asarray(measurement, dtype=float).reshape(2)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError(f"non-finite measurement {measurement!r}")
    r = config.measurement_noise * np.eye(2)
    p = state.covariance
    s = _H @ p @ _H.T + r
    k = p @ _H.T @ np.linalg.inv(s)
    innovation = z - _H @ state.mean
    mean = state.mean + k @ innovation
    ikh = np.eye(4) - k @ _H
    cov = _symmetrize(ikh @ p @ ikh.T + k @ r @ k.T)
    return KalmanState(mean, cov)


def apply_affine(state: KalmanState, t: AffineTransform) -> KalmanState:
    """Carry the state through an inter-frame camera transform.

    Position maps affinely, velocity by the linear part only; the covariance
    is transformed with the block-diagonal Jacobian. Process and measurement
    noise are frame-local model constants and are not touched.
    """
    m = t.linear  # validates non-degeneracy
    j = np.zeros((4, 4))
    j[:2, :2] = m
    j[2:, 2:] = m
    mean = j @ state.mean
    mean[:2] += t.translation
    cov = _symmetrize(j @ state.covariance @ j.T)
    return KalmanState(mean, cov)
