"""Fixed-lag smoother over an augmented state window.

The smoother stacks the last N+1 navigation states into one augmented
state (index 0 = newest, index N = oldest) and runs a Kalman recursion on
the joint system. Propagation advances the newest state through the
strapdown model and shifts everything else down one slot; the joint
covariance moves through the block transition

    Phi = [ F  0 ... 0 ]
          [ I  0 ... 0 ]
          [    ...     ]
          [ 0 ... I  0 ]

with process noise entering only the newest block. A pose measurement is
associated with the newest state; the gain spans the full window, so an
update also corrects every lagged state. The smoothed estimate is the
oldest window state.

Because Phi is a block shift, the covariance propagation is computed
blockwise rather than as dense M x M products; for the default window
(27 states, 243 x 243 joint covariance) this is what keeps a full
benchmark pass in the low seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateCovarianceError, WindowNotReadyError
from .geo3d import wrap_angle
from .strapdown import GravityModel, ImuSample, NavState, jacobian, noise_mapping, predict

__all__ = [
    "MEAS_INDICES",
    "measurement_matrix",
    "augmented_measurement_matrix",
    "NoiseConfig",
    "PoseMeasurement",
    "Innovation",
    "LagWindow",
]

# State components observed by a direct pose measurement: position and
# Euler angles (velocity is unobserved).
MEAS_INDICES = np.array([0, 1, 2, 6, 7, 8])


def measurement_matrix() -> np.ndarray:
    """The constant 6x9 selector H picking position and Euler rows."""
    H = np.zeros((6, 9))
    H[np.arange(6), MEAS_INDICES] = 1.0
    return H


def augmented_measurement_matrix(n_lag: int) -> np.ndarray:
    """[H 0 ... 0] over an N-lag window (measurement hits the newest state)."""
    if n_lag < 0:
        raise ValueError("n_lag must be >= 0")
    H_aug = np.zeros((6, 9 * (n_lag + 1)))
    H_aug[:, 0:9] = measurement_matrix()
    return H_aug


def _sigma6(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (6,):
        raise ValueError(f"{name} must have 6 entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} entries must be finite and > 0")
    return arr


@dataclass
class NoiseConfig:
    """Process and measurement noise standard deviations.

    q_sigmas: accelerometer (m/s^2 per sqrt Hz) then gyro (rad/s per sqrt Hz)
    channels; enters the filter as diag(q^2) mapped through the noise
    mapping and scaled by dt.
    r_sigmas: position (m) then Euler (rad) measurement noise.
    """

    q_sigmas: np.ndarray
    r_sigmas: np.ndarray

    def __post_init__(self):
        self.q_sigmas = _sigma6(self.q_sigmas, "q_sigmas")
        self.r_sigmas = _sigma6(self.r_sigmas, "r_sigmas")

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q_sigmas**2)

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r_sigmas**2)


@dataclass
class PoseMeasurement:
    """A direct 6-DOF pose observation (position m, Euler rad)."""

    t: float
    p: np.ndarray
    euler: np.ndarray
    marker_id: int = 0

    def __post_init__(self):
        self.t = float(self.t)
        if not math.isfinite(self.t):
            raise ValueError("t must be finite")
        p = np.asarray(self.p, dtype=float)
        e = np.asarray(self.euler, dtype=float)
        if p.shape != (3,) or e.shape != (3,):
            raise ValueError("p and euler must be 3-vectors")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(e))):
            raise ValueError("measurement components must be finite")
        self.p = p
        self.euler = wrap_angle(e)
        self.marker_id = int(self.marker_id)


@dataclass
class Innovation:
    """Measurement residual (angle components wrapped) and its covariance."""

    e: np.ndarray
    S: np.ndarray


class LagWindow:
    """Mutable N-lag smoother state: stacked states plus joint covariance.

    Operations on one instance must be serialized by the caller; distinct
    instances are independent.

    Warm-up: the window is seeded with N+1 copies of the initial state, so
    the oldest slot only becomes a genuine lag-N estimate after N
    propagations. ``smoothed_output`` refuses to run before then, which
    guarantees each smoothed epoch is emitted exactly once.
    """

    def __init__(
        self,
        x0: NavState,
        P0,
        n_lag: int,
        cfg: NoiseConfig,
        gravity: GravityModel | None = None,
        g_matrix_faithful: bool = False,
    ):
        if n_lag < 0:
            raise ValueError("n_lag must be >= 0")
        P0 = np.asarray(P0, dtype=float)
        if P0.shape != (9, 9):
            raise ValueError(f"P0 must be 9x9, got shape {P0.shape}")
        if np.abs(P0 - P0.T).max() > 1e-9:
            raise ValueError("P0 must be symmetric")
        if np.linalg.eigvalsh(P0).min() < -1e-9:
            raise ValueError("P0 must be positive semidefinite")

        self.n_lag = int(n_lag)
        self.cfg = cfg
        # Window states as rows of one array, newest first.
        self._x = np.tile(x0.as_vector(), (self.n_lag + 1, 1))
        self.P = np.kron(np.eye(self.n_lag + 1), 0.5 * (P0 + P0.T))
        self.propagations = 0
        self._gravity = gravity
        self._faithful = bool(g_matrix_faithful)
        self._q_var = cfg.q_sigmas**2
        self._R = cfg.R
        self._scratch = np.empty_like(self.P)

    @property
    def dim(self) -> int:
        return 9 * (self.n_lag + 1)

    @property
    def states(self) -> list[NavState]:
        """Snapshot of the window states, newest first."""
        return [self._state_at(i) for i in range(self.n_lag + 1)]

    @property
    def newest(self) -> NavState:
        return self._state_at(0)

    @property
    def oldest(self) -> NavState:
        return self._state_at(self.n_lag)

    def _state_at(self, slot: int) -> NavState:
        row = self._x[slot]
        return NavState._from_parts(row[0:3].copy(), row[3:6].copy(), row[6:9].copy())

    def state_vector(self, slot: int) -> np.ndarray:
        """Copy of one window state as a 9-vector (slot 0 = newest)."""
        return self._x[slot].copy()

    def propagate(self, u: ImuSample, dt: float) -> None:
        """Advance the window one IMU step.

        The newest slot is replaced by the strapdown prediction, older
        states shift down, the oldest drops out, and the joint covariance
        follows the block shift with process noise added to the newest
        block only.
        """
        if not (dt > 0.0):
            raise ValueError(f"dt must be positive, got {dt}")
        x0 = self._state_at(0)
        F = jacobian(x0, u, dt, self._gravity)
        G = noise_mapping(x0, faithful=self._faithful)
        x_new = predict(x0, u, dt, self._gravity)
        # G @ diag(q^2) @ G.T * dt, with the diagonal folded in by scaling columns.
        Qd = (G * self._q_var) @ G.T * dt

        P = self.P
        m = self.dim
        top = F @ P[0:9, 0:9] @ F.T + Qd
        top = 0.5 * (top + top.T)
        if self.n_lag == 0:
            self.P = top
        else:
            newP = self._scratch
            newP[0:9, 0:9] = top
            cross = F @ P[0:9, 0 : m - 9]
            newP[0:9, 9:m] = cross
            newP[9:m, 0:9] = cross.T
            newP[9:m, 9:m] = P[0 : m - 9, 0 : m - 9]
            self.P = newP
            self._scratch = P

        self._x[1:] = self._x[:-1]
        self._x[0, 0:3] = x_new.p
        self._x[0, 3:6] = x_new.v
        self._x[0, 6:9] = x_new.euler
        self.propagations += 1

    def innovation(self, z: PoseMeasurement) -> Innovation:
        """Residual of z against the newest window state, with wrapped angles,
        and its covariance S = H P H^T + R."""
        x0 = self._x[0]
        e = np.empty(6)
        e[0:3] = z.p - x0[0:3]
        e[3:6] = wrap_angle(z.euler - x0[6:9])
        S = self.P[np.ix_(MEAS_INDICES, MEAS_INDICES)] + self._R
        return Innovation(e, 0.5 * (S + S.T))

    def update(self, inn: Innovation) -> None:
        """Fuse an accepted measurement into the whole window.

        The gain spans all N+1 states, so lagged states are corrected too.
        Raises ``DegenerateCovarianceError`` if S has no Cholesky factor.
        """
        try:
            cho = scipy.linalg.cho_factor(inn.S, lower=True)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise DegenerateCovarianceError(
                "innovation covariance is not positive definite"
            ) from exc

        P = self.P
        PHt = P[:, MEAS_INDICES]
        K = scipy.linalg.cho_solve(cho, PHt.T).T
        dx = (K @ inn.e).reshape(self.n_lag + 1, 9)
        self._x[:, 0:6] += dx[:, 0:6]
        self._x[:, 6:9] = wrap_angle(self._x[:, 6:9] + dx[:, 6:9])
        P = P - K @ P[MEAS_INDICES, :]
        np.add(P, P.T, out=self._scratch)
        self._scratch *= 0.5
        self.P = self._scratch
        self._scratch = P

    def smoothed_output(self) -> NavState:
        """The oldest window state: the fixed-lag smoothed estimate.

        Raises ``WindowNotReadyError`` until N propagations have occurred.
        """
        if self.propagations < self.n_lag:
            raise WindowNotReadyError(
                f"lag window warm-up incomplete: {self.propagations} of "
                f"{self.n_lag} propagations"
            )
        return self._state_at(self.n_lag)
