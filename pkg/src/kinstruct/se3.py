"""Rotation and rigid-pose algebra on plain numpy arrays.

Rotations are 3x3 proper orthonormal matrices acting on column vectors.
Orientation angles follow the yaw-pitch-roll (z, then y, then x) convention:
R = rot_z(yaw) @ rot_y(pitch) @ rot_x(roll).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FrameMismatchError, GimbalLockError

# Orthonormality budget for any rotation produced by this module.
ROTATION_TOL = 1e-10

_GIMBAL_GUARD = 1.0 - 1e-9


def _finite(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def rot_x(angle: float) -> np.ndarray:
    """Rotation about the x-axis."""
    angle = _finite(angle, "angle")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation about the y-axis."""
    angle = _finite(angle, "angle")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    """Rotation about the z-axis."""
    angle = _finite(angle, "angle")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def wrap_angle(angle):
    """Wrap angle(s) to the interval (-pi, pi]. Accepts scalars or arrays."""
    a = np.asarray(angle, dtype=float)
    wrapped = a - math.tau * np.round(a / math.tau)
    wrapped = np.where(wrapped <= -math.pi, wrapped + math.tau, wrapped)
    if np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


class YprAngles(NamedTuple):
    """Yaw, pitch, roll in radians.

    Canonical form keeps pitch in [-pi/2, pi/2] and yaw, roll in (-pi, pi].
    """

    yaw: float
    pitch: float
    roll: float


def ypr_to_rot(ypr: YprAngles) -> np.ndarray:
    """Orientation matrix rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)."""
    yaw, pitch, roll = ypr
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rot_to_ypr(rot: np.ndarray) -> YprAngles:
    """Recover canonical yaw-pitch-roll angles from a rotation matrix.

    Raises GimbalLockError when |pitch| is within ~1e-9 of pi/2, where yaw
    and roll are no longer separable.
    """
    rot = np.asarray(rot, dtype=float)
    if abs(rot[2, 0]) > _GIMBAL_GUARD:
        raise GimbalLockError("pitch at +/-pi/2: yaw and roll not separable")
    pitch = math.asin(min(1.0, max(-1.0, -rot[2, 0])))
    yaw = wrap_angle(math.atan2(rot[1, 0], rot[0, 0]))
    roll = wrap_angle(math.atan2(rot[2, 1], rot[2, 2]))
    return YprAngles(yaw, pitch, roll)


def rotation_angle(rot: np.ndarray) -> float:
    """Rotation angle in [0, pi], read off the matrix trace."""
    tr = float(np.trace(np.asarray(rot, dtype=float)))
    return math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))


def is_rotation(rot: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True when `rot` is proper orthonormal within `tol`."""
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
        return False
    if np.max(np.abs(rot @ rot.T - np.eye(3))) >= tol:
        return False
    return abs(np.linalg.det(rot) - 1.0) < tol


@dataclass(frozen=True, eq=False)
class Pose:
    """Position and orientation of a body expressed in a reference frame.

    `frame` names the reference frame; None means unspecified, which is
    treated as compatible with any frame. Instances are immutable and the
    arrays are copied and marked read-only on construction.
    """

    position: np.ndarray
    orientation: np.ndarray
    frame: str | None = None

    def __post_init__(self):
        pos = np.array(self.position, dtype=float)
        rot = np.array(self.orientation, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"position must have shape (3,), got {pos.shape}")
        if rot.shape != (3, 3):
            raise ValueError(f"orientation must have shape (3, 3), got {rot.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(rot))):
            raise ValueError("pose entries must be finite")
        pos.flags.writeable = False
        rot.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)


def identity_pose(frame: str | None = None) -> Pose:
    """Pose with zero translation and identity orientation."""
    return Pose(np.zeros(3), np.eye(3), frame)


def compose(a: Pose, b: Pose) -> Pose:
    """Chain two poses: with a = pose of G in F and b = pose of H in G,
    return the pose of H in F."""
    return Pose(
        a.position + a.orientation @ b.position,
        a.orientation @ b.orientation,
        frame=a.frame,
    )


def invert(pose: Pose) -> Pose:
    """Pose of the reference frame expressed in the body frame."""
    rot_t = pose.orientation.T
    return Pose(-(rot_t @ pose.position), rot_t, frame=None)


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Pose of body b expressed in the frame of body a.

    Both poses must be expressed in the same reference frame; differing
    frame labels raise FrameMismatchError.
    """
    if a.frame is not None and b.frame is not None and a.frame != b.frame:
        raise FrameMismatchError(
            f"poses expressed in different frames: {a.frame!r} vs {b.frame!r}"
        )
    rot_t = a.orientation.T
    return Pose(rot_t @ (b.position - a.position), rot_t @ b.orientation, frame=None)


def dh_link_transform(theta: float, d: float, a: float, alpha: float) -> Pose:
    """Transform between consecutive links: rotate `theta` about z, offset
    `d` along z, offset `a` along the rotated x, twist `alpha` about it."""
    d = _finite(d, "d")
    a = _finite(a, "a")
    rz = rot_z(theta)
    position = np.array([0.0, 0.0, d]) + rz @ np.array([a, 0.0, 0.0])
    return Pose(position, rz @ rot_x(alpha), frame=None)
