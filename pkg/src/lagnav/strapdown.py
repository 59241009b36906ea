"""Strapdown inertial mechanization: nonlinear state prediction, its
analytic 9x9 Jacobian, and the mapping of IMU noise into state space.

The navigation state is the 9-vector [position, velocity, euler] in a
z-down navigation frame. Prediction is a single forward-Euler step:

    p' = p + v * dt
    v' = v + (C(euler) @ f_b + g) * dt
    e' = e + (E(euler) @ w_b) * dt

where C maps body to navigation frame, E maps body angular rate to Euler
angle rates, f_b is specific force and g is gravitational acceleration.
No Coriolis, bias, or scale-factor terms: the model is deliberately the
minimal 9-state mechanization.

These functions sit in the smoother's per-sample hot loop, so they build
their matrices from one shared set of trig evaluations and skip input
re-validation (NavState and ImuSample validate on construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GimbalLockError
from .geo3d import GIMBAL_GUARD_RAD, wrap_angle

__all__ = [
    "GRAVITY_MPS2",
    "GravityModel",
    "NavState",
    "ImuSample",
    "predict",
    "jacobian",
    "noise_mapping",
]

# Standard gravity, z-down navigation frame.
GRAVITY_MPS2 = 9.80665

_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass
class GravityModel:
    """Navigation-frame gravitational acceleration (default: z-down standard)."""

    g_n: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, GRAVITY_MPS2]))

    def __post_init__(self):
        self.g_n = _vec3(self.g_n, "g_n")


@dataclass
class NavState:
    """Position (m), velocity (m/s) and Euler angles (rad), navigation frame.

    Euler angles are normalized to (-pi, pi] on construction.
    """

    p: np.ndarray
    v: np.ndarray
    euler: np.ndarray

    def __post_init__(self):
        self.p = _vec3(self.p, "p")
        self.v = _vec3(self.v, "v")
        self.euler = wrap_angle(_vec3(self.euler, "euler"))

    @classmethod
    def zero(cls) -> "NavState":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x) -> "NavState":
        x = np.asarray(x, dtype=float)
        if x.shape != (9,):
            raise ValueError(f"state vector must have shape (9,), got {x.shape}")
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy())

    @classmethod
    def _from_parts(cls, p, v, euler) -> "NavState":
        # Trusted constructor for internal hot paths: inputs are float64
        # 3-vectors already validated and wrapped upstream.
        obj = object.__new__(cls)
        obj.p = p
        obj.v = v
        obj.euler = euler
        return obj

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.p, self.v, self.euler))

    def copy(self) -> "NavState":
        return NavState._from_parts(self.p.copy(), self.v.copy(), self.euler.copy())


@dataclass
class ImuSample:
    """One IMU reading: specific force and angular rate in the body frame."""

    t: float
    f_b: np.ndarray
    w_b: np.ndarray

    def __post_init__(self):
        self.t = float(self.t)
        if not math.isfinite(self.t):
            raise ValueError("t must be finite")
        self.f_b = _vec3(self.f_b, "f_b")
        self.w_b = _vec3(self.w_b, "w_b")


def _trig(euler) -> tuple[float, float, float, float, float, float]:
    """(cos, sin) of roll, pitch, yaw, with the gimbal-lock guard applied."""
    phi = euler[0]
    theta = euler[1]
    psi = euler[2]
    if abs(theta) >= _HALF_PI - GIMBAL_GUARD_RAD:
        raise GimbalLockError(theta, GIMBAL_GUARD_RAD)
    return (
        math.cos(phi),
        math.sin(phi),
        math.cos(theta),
        math.sin(theta),
        math.cos(psi),
        math.sin(psi),
    )


def _dcm(cph, sph, cth, sth, cps, sps) -> np.ndarray:
    return np.array(
        [
            [cps * cth, cps * sth * sph - sps * cph, cps * sth * cph + sps * sph],
            [sps * cth, sps * sth * sph + cps * cph, sps * sth * cph - cps * sph],
            [-sth, cth * sph, cth * cph],
        ]
    )


def _euler_rate(cph, sph, cth, sth) -> np.ndarray:
    tth = sth / cth
    return np.array(
        [
            [1.0, sph * tth, cph * tth],
            [0.0, cph, -sph],
            [0.0, sph / cth, cph / cth],
        ]
    )


def _wrap1(a: float) -> float:
    """Scalar wrap to (-pi, pi]; same convention as geo3d.wrap_angle."""
    r = math.fmod(a + math.pi, _TWO_PI)
    if r < 0.0:
        r += _TWO_PI
    w = r - math.pi
    if w <= -math.pi:
        w += _TWO_PI
    return w


def predict(x: NavState, u: ImuSample, dt: float, grav: GravityModel | None = None) -> NavState:
    """One forward-Euler prediction step of the strapdown equations.

    Raises ``GimbalLockError`` near |pitch| = pi/2 and ``ValueError`` for
    dt <= 0. Output Euler angles are re-wrapped to (-pi, pi].
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    g_n = (grav or _STANDARD_GRAVITY).g_n
    cph, sph, cth, sth, cps, sps = _trig(x.euler)
    C = _dcm(cph, sph, cth, sth, cps, sps)
    E = _euler_rate(cph, sph, cth, sth)
    p_new = x.p + x.v * dt
    v_new = x.v + (C @ u.f_b + g_n) * dt
    e_raw = x.euler + (E @ u.w_b) * dt
    e_new = np.array([_wrap1(e_raw[0]), _wrap1(e_raw[1]), _wrap1(e_raw[2])])
    return NavState._from_parts(p_new, v_new, e_new)


def jacobian(x: NavState, u: ImuSample, dt: float, grav: GravityModel | None = None) -> np.ndarray:
    """Analytic Jacobian of :func:`predict` with respect to the 9-state.

    Block structure (state order p, v, euler):

        dp'/dv = dt * I
        dv'/de = dt * d(C(e) @ f_b)/de
        de'/de = I + dt * d(E(e) @ w_b)/de

    All other off-diagonal blocks are zero. The rotation partials use the
    skew identities dC/droll = C [e_x]x, dC/dpitch = [Rz e_y]x C and
    dC/dyaw = [e_z]x C applied directly to f_b.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    cph, sph, cth, sth, cps, sps = _trig(x.euler)
    C = _dcm(cph, sph, cth, sth, cps, sps)
    f = u.f_b
    w = u.w_b
    a = C @ f

    F = np.eye(9)
    F[0, 3] = F[1, 4] = F[2, 5] = dt

    # d(C f)/d(roll): C @ (e_x x f); d/d(pitch): (Rz e_y) x (C f); d/d(yaw): e_z x (C f)
    col_phi = C @ np.array([0.0, -f[2], f[1]])
    col_theta = np.array([cps * a[2], sps * a[2], -sps * a[1] - cps * a[0]])
    F[3, 6] = dt * col_phi[0]
    F[4, 6] = dt * col_phi[1]
    F[5, 6] = dt * col_phi[2]
    F[3, 7] = dt * col_theta[0]
    F[4, 7] = dt * col_theta[1]
    F[5, 7] = dt * col_theta[2]
    F[3, 8] = dt * -a[1]
    F[4, 8] = dt * a[0]

    # d(E w)/d(roll) and d(E w)/d(pitch); no yaw dependence.
    tth = sth / cth
    sec2 = 1.0 / (cth * cth)
    lever = sph * w[1] + cph * w[2]
    F[6, 6] += dt * (cph * tth * w[1] - sph * tth * w[2])
    F[7, 6] += dt * (-sph * w[1] - cph * w[2])
    F[8, 6] += dt * ((cph * w[1] - sph * w[2]) / cth)
    F[6, 7] += dt * (lever * sec2)
    F[8, 7] += dt * (lever * sth * sec2)
    return F


def noise_mapping(x: NavState, faithful: bool = False) -> np.ndarray:
    """9x6 matrix mapping IMU noise channels into state space.

    Columns 0-2 are accelerometer noise, columns 3-5 gyro noise. Position
    rows are zero; velocity rows carry the body-to-nav DCM. The gyro block
    follows the same kinematic path as the angular-rate signal (the
    Euler-rate matrix); ``faithful=True`` instead places the DCM there as
    well, for comparison runs.
    """
    cph, sph, cth, sth, cps, sps = _trig(x.euler)
    G = np.zeros((9, 6))
    C = _dcm(cph, sph, cth, sth, cps, sps)
    G[3:6, 0:3] = C
    G[6:9, 3:6] = C if faithful else _euler_rate(cph, sph, cth, sth)
    return G


_STANDARD_GRAVITY = GravityModel()
