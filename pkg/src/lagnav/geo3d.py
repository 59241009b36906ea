"""3D rotation kinematics shared by the whole library.

Conventions (fixed, not configurable):

- Euler angles are (roll, pitch, yaw) in radians with the ZYX composition:
  yaw about z, then pitch about y, then roll about x.
- The direction cosine matrix maps body-frame vectors into the navigation
  frame (z-down).
- Angles are normalized to the half-open interval (-pi, pi].

The Euler-rate matrix is singular at pitch = +/-90 deg; callers get a
``GimbalLockError`` inside a configurable guard band rather than a
regularized result, because the target platform (a hovering vehicle) never
operates near that attitude.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import GimbalLockError

__all__ = [
    "GIMBAL_GUARD_RAD",
    "wrap_angle",
    "dcm_body_to_nav",
    "euler_rate_matrix",
]

# Default half-width of the excluded band around |pitch| = pi/2.
GIMBAL_GUARD_RAD = 1e-6

_TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Normalize an angle (or array of angles) to (-pi, pi].

    The result is congruent to the input modulo 2*pi. The boundary maps to
    +pi, never -pi, so residuals on angle components have a single
    representation.
    """
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("angle must be finite")
    wrapped = np.remainder(a + math.pi, _TWO_PI) - math.pi
    wrapped = np.where(wrapped <= -math.pi, wrapped + _TWO_PI, wrapped)
    if a.ndim == 0:
        return float(wrapped)
    return wrapped


def _euler_components(euler) -> tuple[float, float, float]:
    e = np.asarray(euler, dtype=float)
    if e.shape != (3,):
        raise ValueError(f"euler angles must be a 3-vector, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise ValueError("euler angles must be finite")
    return float(e[0]), float(e[1]), float(e[2])


def dcm_body_to_nav(euler) -> np.ndarray:
    """Direction cosine matrix mapping body vectors to navigation vectors.

    Parameters
    ----------
    euler : array-like, shape (3,)
        (roll, pitch, yaw) in radians.

    Returns
    -------
    np.ndarray, shape (3, 3)
        Rz(yaw) @ Ry(pitch) @ Rx(roll); orthonormal with determinant +1.
    """
    phi, theta, psi = _euler_components(euler)
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cps * cth, cps * sth * sph - sps * cph, cps * sth * cph + sps * sph],
            [sps * cth, sps * sth * sph + cps * cph, sps * sth * cph - cps * sph],
            [-sth, cth * sph, cth * cph],
        ]
    )


def euler_rate_matrix(euler, guard_rad: float = GIMBAL_GUARD_RAD) -> np.ndarray:
    """Matrix mapping body angular rate to Euler angle rates.

    Parameters
    ----------
    euler : array-like, shape (3,)
        (roll, pitch, yaw) in radians.
    guard_rad : float
        Half-width of the excluded band around |pitch| = pi/2.

    Returns
    -------
    np.ndarray, shape (3, 3)
        Identity at level attitude; contains tan(pitch) and sec(pitch)
        terms elsewhere.

    Raises
    ------
    GimbalLockError
        If |pitch| >= pi/2 - guard_rad.
    """
    phi, theta, _ = _euler_components(euler)
    if abs(theta) >= math.pi / 2.0 - guard_rad:
        raise GimbalLockError(theta, guard_rad)
    cph, sph = math.cos(phi), math.sin(phi)
    cth = math.cos(theta)
    tth = math.tan(theta)
    return np.array(
        [
            [1.0, sph * tth, cph * tth],
            [0.0, cph, -sph],
            [0.0, sph / cth, cph / cth],
        ]
    )
