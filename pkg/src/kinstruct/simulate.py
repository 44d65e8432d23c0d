"""Ground-truth serial-chain simulator producing camera-frame marker poses.

A chain has n links connected by n-1 one-degree-of-freedom joints. Link 1 is
the fixed base. One motion-capture marker is rigidly attached to each link,
in an order unrelated to the link order, and each joint is driven by one
entry of the joint signal vector through a hidden permutation. The simulator
is the source of ground truth the identification pipeline is tested against.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import se3
from .errors import (
    DegenerateDisplacementError,
    DimensionMismatchError,
    InvalidRangeError,
)
from .se3 import Pose

# Orthonormality budget for observed marker orientations (looser than the
# construction tolerance so that deserialized data passes too).
_OBS_ROTATION_TOL = 1e-8


class JointType(str, Enum):
    PRISMATIC = "prismatic"
    REVOLUTE = "revolute"


@dataclass(frozen=True)
class DhJoint:
    """One joint in Denavit-Hartenberg form.

    For a prismatic joint the signal adds to the z-offset (d = d0 + q) and
    theta stays at theta0; for a revolute joint the signal adds to the
    z-rotation (theta = theta0 + q) and d stays at d0.
    """

    joint_type: JointType
    theta0: float
    d0: float
    a: float
    alpha: float

    def __post_init__(self):
        for name in ("theta0", "d0", "a", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if abs(self.alpha) > math.pi:
            raise ValueError(f"|alpha| must not exceed pi, got {self.alpha}")

    def transform(self, signal: float) -> Pose:
        """Link-to-link transform at the given joint signal value."""
        if self.joint_type is JointType.REVOLUTE:
            return se3.dh_link_transform(self.theta0 + signal, self.d0, self.a, self.alpha)
        return se3.dh_link_transform(self.theta0, self.d0 + signal, self.a, self.alpha)


@dataclass(frozen=True)
class MarkerAttachment:
    """Rigid mount of a marker on a link; `link_index` is 1-based, link 1
    being the fixed base. `offset` is the marker pose in the link frame."""

    link_index: int
    offset: Pose

    def __post_init__(self):
        if self.link_index < 1:
            raise ValueError(f"link_index must be >= 1, got {self.link_index}")


@dataclass(frozen=True)
class ChainSpec:
    """Full description of a simulated chain.

    `attachments[i]` mounts marker i; the attachments must cover every link
    exactly once. `joint_signal_permutation[j]` is the index of the signal
    column driving joint j (joints ordered base to tip), and must be a
    permutation of 0..n-2. `camera_pose` is the pose of the base link frame
    in the camera frame.
    """

    joints: tuple[DhJoint, ...]
    attachments: tuple[MarkerAttachment, ...]
    joint_signal_permutation: tuple[int, ...]
    camera_pose: Pose = field(default_factory=lambda: se3.identity_pose("camera"))

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "attachments", tuple(self.attachments))
        object.__setattr__(
            self, "joint_signal_permutation", tuple(self.joint_signal_permutation)
        )
        n = len(self.attachments)
        if n < 2:
            raise ValueError("a chain needs at least two links")
        if len(self.joints) != n - 1:
            raise ValueError(
                f"{n} links require {n - 1} joints, got {len(self.joints)}"
            )
        if sorted(a.link_index for a in self.attachments) != list(range(1, n + 1)):
            raise ValueError("attachments must cover links 1..n exactly once")
        if sorted(self.joint_signal_permutation) != list(range(n - 1)):
            raise ValueError("joint_signal_permutation must permute 0..n-2")

    @property
    def n_links(self) -> int:
        return len(self.attachments)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def link_of_marker(self, marker: int) -> int:
        """1-based link index to which the given marker is attached."""
        return self.attachments[marker].link_index

    def marker_of_link(self, link: int) -> int:
        """Marker index attached to the given 1-based link."""
        for i, att in enumerate(self.attachments):
            if att.link_index == link:
                return i
        raise IndexError(f"no marker on link {link}")

    def joint_of_signal(self, signal: int) -> int:
        """0-based joint position driven by the given signal column."""
        return self.joint_signal_permutation.index(signal)


@dataclass(frozen=True)
class ObservationSet:
    """Camera-frame marker poses over time with the driving joint signals.

    positions has shape (T, n, 3), rotations (T, n, 3, 3) and joint_values
    (T, n-1); times is strictly increasing with length T >= 1.
    """

    times: np.ndarray
    positions: np.ndarray
    rotations: np.ndarray
    joint_values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        positions = np.array(self.positions, dtype=float)
        rotations = np.array(self.rotations, dtype=float)
        joints = np.array(self.joint_values, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise DimensionMismatchError("times must be a non-empty 1-d array")
        t = times.size
        if positions.ndim != 3 or positions.shape[0] != t or positions.shape[2] != 3:
            raise DimensionMismatchError(
                f"positions must have shape (T, n, 3), got {positions.shape}"
            )
        n = positions.shape[1]
        if rotations.shape != (t, n, 3, 3):
            raise DimensionMismatchError(
                f"rotations must have shape (T, n, 3, 3), got {rotations.shape}"
            )
        if joints.shape != (t, n - 1):
            raise DimensionMismatchError(
                f"joint_values must have shape (T, n-1), got {joints.shape}"
            )
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        for arr, name in ((positions, "positions"), (rotations, "rotations"), (joints, "joint_values")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        gram = np.einsum("tnij,tnkj->tnik", rotations, rotations)
        if np.max(np.abs(gram - np.eye(3))) > _OBS_ROTATION_TOL:
            raise ValueError("marker orientations must be orthonormal")
        if np.any(np.linalg.det(rotations) < 0):
            raise ValueError("marker orientations must be proper rotations")
        for arr in (times, positions, rotations, joints):
            arr.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "joint_values", joints)

    @property
    def n_obs(self) -> int:
        return self.times.size

    @property
    def n_markers(self) -> int:
        return self.positions.shape[1]

    @property
    def n_signals(self) -> int:
        return self.joint_values.shape[1]

    def marker_pose(self, t: int, marker: int) -> Pose:
        """Pose of one marker at one time step, in the camera frame."""
        return Pose(self.positions[t, marker], self.rotations[t, marker], frame="camera")


def forward_markers(chain: ChainSpec, signals: np.ndarray) -> list[Pose]:
    """Camera-frame pose of every marker at one joint configuration."""
    signals = np.asarray(signals, dtype=float)
    if signals.shape != (chain.n_joints,):
        raise DimensionMismatchError(
            f"expected {chain.n_joints} joint signals, got shape {signals.shape}"
        )
    link_pose = chain.camera_pose
    link_poses = [link_pose]
    for j, joint in enumerate(chain.joints):
        link_pose = se3.compose(link_pose, joint.transform(signals[chain.joint_signal_permutation[j]]))
        link_poses.append(link_pose)
    return [
        se3.compose(link_poses[att.link_index - 1], att.offset)
        for att in chain.attachments
    ]


def observe(
    chain: ChainSpec, trajectory: np.ndarray, times: np.ndarray | None = None
) -> ObservationSet:
    """Run the chain through a trajectory (one row per time step)."""
    trajectory = np.asarray(trajectory, dtype=float)
    if trajectory.ndim != 2 or trajectory.shape[1] != chain.n_joints:
        raise DimensionMismatchError(
            f"trajectory must have shape (T, {chain.n_joints}), got {trajectory.shape}"
        )
    t_total = trajectory.shape[0]
    if times is None:
        times = np.arange(t_total, dtype=float)
    positions = np.empty((t_total, chain.n_links, 3))
    rotations = np.empty((t_total, chain.n_links, 3, 3))
    for t in range(t_total):
        for i, pose in enumerate(forward_markers(chain, trajectory[t])):
            positions[t, i] = pose.position
            rotations[t, i] = pose.orientation
    return ObservationSet(times, positions, rotations, trajectory)


def gen_sinusoidal(
    n_joints: int,
    n_obs: int,
    amplitude_range: tuple[float, float] = (0.2, 1.0),
    frequency_range: tuple[float, float] = (0.1, 1.0),
    seed: int = 0,
    sample_rate: float = 10.0,
    return_params: bool = False,
):
    """Independent random sinusoid per joint, sampled at `sample_rate` Hz.

    Column k is amplitude[k] * sin(2*pi*frequency[k]*t + phase[k]) with the
    amplitude and frequency drawn uniformly from the given ranges and the
    phase from [0, 2*pi). With return_params=True also returns the
    (amplitudes, frequencies, phases) arrays.
    """
    if n_joints < 1 or n_obs < 1:
        raise DimensionMismatchError("need n_joints >= 1 and n_obs >= 1")
    for lo, hi, name in (
        (*amplitude_range, "amplitude_range"),
        (*frequency_range, "frequency_range"),
    ):
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi or lo < 0:
            raise InvalidRangeError(f"{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
    if sample_rate <= 0:
        raise InvalidRangeError(f"sample_rate must be positive, got {sample_rate}")
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(*amplitude_range, size=n_joints)
    frequencies = rng.uniform(*frequency_range, size=n_joints)
    phases = rng.uniform(0.0, 2 * math.pi, size=n_joints)
    t = np.arange(n_obs, dtype=float) / sample_rate
    trajectory = amplitudes * np.sin(2 * math.pi * frequencies * t[:, None] + phases)
    if return_params:
        return trajectory, (amplitudes, frequencies, phases)
    return trajectory


def gen_fully_informative(
    n_joints: int,
    rest_pose: np.ndarray | None = None,
    displacement: float | np.ndarray = 0.5,
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Minimal trajectory that exercises every joint in isolation.

    Emits one row pair per joint: both rows equal the rest pose except that
    the second moves joint k by displacement[k], for 2*n_joints rows total.
    Returns the trajectory and the (row1, row2) index pair for each joint.
    A displacement congruent to zero modulo 2*pi cannot change the joint
    and raises DegenerateDisplacementError.
    """
    if n_joints < 1:
        raise DimensionMismatchError("need n_joints >= 1")
    if rest_pose is None:
        rest_pose = np.zeros(n_joints)
    rest_pose = np.asarray(rest_pose, dtype=float)
    if rest_pose.shape != (n_joints,):
        raise DimensionMismatchError(
            f"rest_pose must have shape ({n_joints},), got {rest_pose.shape}"
        )
    displacement = np.broadcast_to(np.asarray(displacement, dtype=float), (n_joints,))
    wrapped = se3.wrap_angle(displacement)
    bad = np.flatnonzero(np.abs(np.atleast_1d(wrapped)) < 1e-12)
    if bad.size:
        raise DegenerateDisplacementError(
            f"displacement for joint(s) {bad.tolist()} is zero modulo 2*pi"
        )
    rows = []
    pairs = []
    for k in range(n_joints):
        moved = rest_pose.copy()
        moved[k] += displacement[k]
        pairs.append((len(rows), len(rows) + 1))
        rows.append(rest_pose.copy())
        rows.append(moved)
    return np.vstack(rows), pairs


def dedup_mod2pi(
    trajectory: np.ndarray,
    revolute_columns: Sequence[int] | None = None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Drop rows that repeat an earlier row up to whole turns.

    Rows compare equal when every column matches within `tol` after wrapping
    the difference to (-pi, pi]. By default all columns are compared this
    way (joint types are unknown before identification); pass
    `revolute_columns` to restrict wrapping to those columns and compare the
    rest exactly within `tol`.
    """
    trajectory = np.asarray(trajectory, dtype=float)
    if trajectory.ndim != 2:
        raise DimensionMismatchError("trajectory must be 2-d")
    wrap_mask = np.ones(trajectory.shape[1], dtype=bool)
    if revolute_columns is not None:
        wrap_mask[:] = False
        wrap_mask[list(revolute_columns)] = True
    kept_rows: list[np.ndarray] = []
    kept_idx = []
    for row in trajectory:
        duplicate = False
        for kept in kept_rows:
            diff = row - kept
            diff[wrap_mask] = se3.wrap_angle(diff[wrap_mask])
            if np.max(np.abs(diff)) < tol:
                duplicate = True
                break
        if not duplicate:
            kept_rows.append(row.copy())
    return np.array(kept_rows).reshape(len(kept_rows), trajectory.shape[1])


def random_chain(seed: int, n_links: int, type_policy="random") -> ChainSpec:
    """Draw a random chain: lengths from [0.1, 1.0] m, angles from (-pi, pi],
    marker-to-link and joint-to-signal assignments uniformly random.

    `type_policy` is "random", "revolute", "prismatic", or an explicit
    sequence of one JointType (or its string value) per joint.
    """
    if n_links < 2:
        raise ValueError(f"need at least 2 links, got {n_links}")
    rng = np.random.default_rng(seed)
    n_joints = n_links - 1
    if type_policy == "random":
        types = [JointType.REVOLUTE if b else JointType.PRISMATIC for b in rng.integers(0, 2, n_joints)]
    elif type_policy == "revolute":
        types = [JointType.REVOLUTE] * n_joints
    elif type_policy == "prismatic":
        types = [JointType.PRISMATIC] * n_joints
    elif isinstance(type_policy, str):
        raise InvalidRangeError(f"unknown type policy {type_policy!r}")
    else:
        types = [JointType(t) for t in type_policy]
        if len(types) != n_joints:
            raise DimensionMismatchError(
                f"type list must have {n_joints} entries, got {len(types)}"
            )
    joints = tuple(
        DhJoint(
            joint_type=types[j],
            theta0=rng.uniform(-math.pi, math.pi),
            d0=rng.uniform(0.1, 1.0),
            a=rng.uniform(0.1, 1.0),
            alpha=rng.uniform(-math.pi, math.pi),
        )
        for j in range(n_joints)
    )
    marker_links = rng.permutation(n_links) + 1
    attachments = tuple(
        MarkerAttachment(
            link_index=int(link),
            offset=Pose(
                rng.uniform(-0.5, 0.5, size=3),
                se3.ypr_to_rot(
                    se3.YprAngles(
                        rng.uniform(-math.pi, math.pi),
                        rng.uniform(-1.4, 1.4),
                        rng.uniform(-math.pi, math.pi),
                    )
                ),
            ),
        )
        for link in marker_links
    )
    signal_perm = tuple(int(k) for k in rng.permutation(n_joints))
    return ChainSpec(joints=joints, attachments=attachments, joint_signal_permutation=signal_perm)
