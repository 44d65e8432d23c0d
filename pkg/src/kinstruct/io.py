"""Serialization of datasets, chains, trajectories and result reports.

All emitters produce a canonical text form: fixed field order, two-space
indentation, and floats at 17 significant digits (lossless for binary64),
so identical inputs yield byte-identical files. Orientations are stored as
unit quaternions in (w, x, y, z) order with a canonical sign (first nonzero
component positive); datasets redundantly carry yaw-pitch-roll where it is
defined. Readers check the schema version and the documented invariants and
name the offending field when they fail.
"""

import json
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.spatial.transform import Rotation

from ._version import __version__
from .errors import (
    GimbalLockError,
    InvariantViolationError,
    ParseError,
    SchemaVersionError,
)
from .feasibility import TestResult, Tolerances
from .identify import KinematicStructure, TripletVerdict
from .montecarlo import ConfusionMatrix, McConfig, McReport
from .se3 import Pose, rot_to_ypr
from .simulate import (
    ChainSpec,
    DhJoint,
    JointType,
    MarkerAttachment,
    ObservationSet,
)

SCHEMA_VERSION = 1

_QUAT_NORM_TOL = 1e-9


# ---------------------------------------------------------------------------
# canonical emission

def dumps_canonical(value) -> str:
    """Serialize to canonical JSON text: stable field order (insertion
    order), two-space indentation, 17-significant-digit floats."""
    return _emit(value, 0) + "\n"


def _emit(value, indent: int) -> str:
    if isinstance(value, dict):
        if not value:
            return "{}"
        pad = "  " * (indent + 1)
        body = ",\n".join(
            f"{pad}{json.dumps(key)}: {_emit(item, indent + 1)}"
            for key, item in value.items()
        )
        return "{\n" + body + "\n" + "  " * indent + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(item, (dict, list, tuple)) for item in value):
            return "[" + ", ".join(_emit(item, indent) for item in value) + "]"
        pad = "  " * (indent + 1)
        body = ",\n".join(f"{pad}{_emit(item, indent + 1)}" for item in value)
        return "[\n" + body + "\n" + "  " * indent + "]"
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("non-finite floats are not serializable")
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _write_doc(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(dumps_canonical(doc))


# ---------------------------------------------------------------------------
# validated access

def _load_doc(path, expected_kind: str) -> dict:
    with open(path, "r", encoding="utf-8") as stream:
        text = stream.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(
            f"{path}: invalid document at line {err.lineno}, column "
            f"{err.colno}: {err.msg}"
        ) from err
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = _int(doc, "schema_version", str(path))
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: schema version {version} not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    kind = _str(doc, "kind", str(path))
    if kind != expected_kind:
        raise ParseError(f"{path}: kind {kind!r} is not {expected_kind!r}")
    return doc


def _field(doc, key: str, path: str):
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected an object")
    if key not in doc:
        raise ParseError(f"{path}: missing field {key!r}")
    return doc[key], f"{path}.{key}"


def _int(doc, key, path) -> int:
    value, where = _field(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer")
    return value


def _float(doc, key, path) -> float:
    value, where = _field(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number")
    return float(value)


def _str(doc, key, path) -> str:
    value, where = _field(doc, key, path)
    if not isinstance(value, str):
        raise ParseError(f"{where}: expected a string")
    return value


def _bool(doc, key, path) -> bool:
    value, where = _field(doc, key, path)
    if not isinstance(value, bool):
        raise ParseError(f"{where}: expected a boolean")
    return value


def _list(doc, key, path, length: int | None = None) -> tuple[list, str]:
    value, where = _field(doc, key, path)
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected an array")
    if length is not None and len(value) != length:
        raise ParseError(f"{where}: expected {length} entries, got {len(value)}")
    return value, where


def _floats(doc, key, path, length: int | None = None) -> list[float]:
    value, where = _list(doc, key, path, length)
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ParseError(f"{where}[{i}]: expected a number")
        out.append(float(item))
    return out


# ---------------------------------------------------------------------------
# orientation encoding

def _quat_from_matrix(rot: np.ndarray) -> list[float]:
    """(w, x, y, z) unit quaternion with the first nonzero component
    positive, so equal rotations serialize identically."""
    xyzw = Rotation.from_matrix(rot).as_quat()
    quat = np.concatenate(([xyzw[3]], xyzw[:3]))
    for component in quat:
        if component != 0.0:
            if component < 0.0:
                quat = -quat
            break
    return [float(c) for c in quat]


def _matrix_from_quat(values: list[float], where: str) -> np.ndarray:
    norm = math.sqrt(sum(c * c for c in values))
    if abs(norm - 1.0) > _QUAT_NORM_TOL:
        raise InvariantViolationError(
            f"{where}: quaternion norm {norm:.12g} is not 1"
        )
    w, x, y, z = (c / norm for c in values)
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def _ypr_or_none(rot: np.ndarray) -> list[float] | None:
    try:
        return [float(a) for a in rot_to_ypr(rot)]
    except GimbalLockError:
        return None


def _pose_doc(pose: Pose) -> dict:
    return {
        "position": [float(c) for c in pose.position],
        "quaternion": _quat_from_matrix(pose.orientation),
    }


def _pose_from_doc(doc, path: str, frame: str | None = None) -> Pose:
    position = _floats(doc, "position", path, 3)
    quaternion = _floats(doc, "quaternion", path, 4)
    where = f"{path}.quaternion"
    return Pose(np.array(position), _matrix_from_quat(quaternion, where), frame)


# ---------------------------------------------------------------------------
# datasets

def write_dataset(obs: ObservationSet, path) -> None:
    """Write an observation set: times, per-time marker poses (position,
    quaternion, yaw-pitch-roll where defined) and the joint-signal rows."""
    poses = []
    for t in range(obs.n_obs):
        row = []
        for i in range(obs.n_markers):
            rot = obs.rotations[t, i]
            row.append(
                {
                    "position": [float(c) for c in obs.positions[t, i]],
                    "quaternion": _quat_from_matrix(rot),
                    "ypr": _ypr_or_none(rot),
                }
            )
        poses.append(row)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "dataset",
        "markers": obs.n_markers,
        "times": [float(t) for t in obs.times],
        "poses": poses,
        "joint_values": [[float(v) for v in row] for row in obs.joint_values],
    }
    _write_doc(path, doc)


def read_dataset(path) -> ObservationSet:
    """Read an observation set; quaternions are converted to rotation
    matrices. Raises ParseError / SchemaVersionError / InvariantViolationError."""
    doc = _load_doc(path, "dataset")
    root = str(path)
    n = _int(doc, "markers", root)
    times = _floats(doc, "times", root)
    if not times:
        raise ParseError(f"{root}.times: at least one observation required")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InvariantViolationError(f"{root}.times: must be strictly increasing")
    t_count = len(times)
    pose_rows, poses_where = _list(doc, "poses", root, t_count)
    positions = np.empty((t_count, n, 3))
    rotations = np.empty((t_count, n, 3, 3))
    for t, row in enumerate(pose_rows):
        row_where = f"{poses_where}[{t}]"
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"{row_where}: expected {n} marker poses")
        for i, record in enumerate(row):
            where = f"{row_where}[{i}]"
            positions[t, i] = _floats(record, "position", where, 3)
            quaternion = _floats(record, "quaternion", where, 4)
            rotations[t, i] = _matrix_from_quat(quaternion, f"{where}.quaternion")
    joint_rows, joints_where = _list(doc, "joint_values", root, t_count)
    signals = np.empty((t_count, n - 1))
    for t, row in enumerate(joint_rows):
        where = f"{joints_where}[{t}]"
        if not isinstance(row, list) or len(row) != n - 1:
            raise ParseError(f"{where}: expected {n - 1} signal values")
        for k, item in enumerate(row):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ParseError(f"{where}[{k}]: expected a number")
            signals[t, k] = float(item)
    return ObservationSet(np.array(times), positions, rotations, signals)


# ---------------------------------------------------------------------------
# chains

def write_chain(chain: ChainSpec, path) -> None:
    """Write a full chain description, ground truth included."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "chain",
        "camera_pose": _pose_doc(chain.camera_pose),
        "joints": [
            {
                "type": joint.joint_type.value,
                "theta0": joint.theta0,
                "d0": joint.d0,
                "a": joint.a,
                "alpha": joint.alpha,
            }
            for joint in chain.joints
        ],
        "attachments": [
            {"link": att.link_index, **_pose_doc(att.offset)}
            for att in chain.attachments
        ],
        "joint_signal_permutation": list(chain.joint_signal_permutation),
    }
    _write_doc(path, doc)


def read_chain(path) -> ChainSpec:
    doc = _load_doc(path, "chain")
    root = str(path)
    camera_doc, camera_where = _field(doc, "camera_pose", root)
    camera = _pose_from_doc(camera_doc, camera_where, frame="camera")
    joints = []
    joint_docs, joints_where = _list(doc, "joints", root)
    for j, joint_doc in enumerate(joint_docs):
        where = f"{joints_where}[{j}]"
        type_name = _str(joint_doc, "type", where)
        try:
            joint_type = JointType(type_name)
        except ValueError as err:
            raise ParseError(f"{where}.type: unknown joint type {type_name!r}") from err
        joints.append(
            DhJoint(
                joint_type,
                _float(joint_doc, "theta0", where),
                _float(joint_doc, "d0", where),
                _float(joint_doc, "a", where),
                _float(joint_doc, "alpha", where),
            )
        )
    attachments = []
    attachment_docs, att_where = _list(doc, "attachments", root)
    for i, att_doc in enumerate(attachment_docs):
        where = f"{att_where}[{i}]"
        attachments.append(
            MarkerAttachment(_int(att_doc, "link", where), _pose_from_doc(att_doc, where))
        )
    permutation, _ = _list(doc, "joint_signal_permutation", root)
    return ChainSpec(tuple(joints), tuple(attachments), tuple(permutation), camera)


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True)
class TrajectoryData:
    """Joint-signal rows with their generation mode and, for paired designs,
    the (rest, displaced) row-index pairs per joint."""

    joint_values: np.ndarray
    mode: str
    pairs: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        values = np.array(self.joint_values, dtype=float)
        if values.ndim != 2:
            raise ValueError("joint_values must be 2-d")
        values.flags.writeable = False
        object.__setattr__(self, "joint_values", values)
        if self.pairs is not None:
            object.__setattr__(
                self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs)
            )


def write_trajectory(data: TrajectoryData, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "trajectory",
        "mode": data.mode,
        "joint_values": [[float(v) for v in row] for row in data.joint_values],
        "pairs": None if data.pairs is None else [list(p) for p in data.pairs],
    }
    _write_doc(path, doc)


def read_trajectory(path) -> TrajectoryData:
    doc = _load_doc(path, "trajectory")
    root = str(path)
    mode = _str(doc, "mode", root)
    rows, rows_where = _list(doc, "joint_values", root)
    if not rows:
        raise ParseError(f"{rows_where}: at least one row required")
    width = None
    values = []
    for t, row in enumerate(rows):
        where = f"{rows_where}[{t}]"
        if not isinstance(row, list):
            raise ParseError(f"{where}: expected an array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{where}: expected {width} entries, got {len(row)}")
        for k, item in enumerate(row):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ParseError(f"{where}[{k}]: expected a number")
        values.append([float(v) for v in row])
    pairs_value, pairs_where = _field(doc, "pairs", root)
    pairs = None
    if pairs_value is not None:
        if not isinstance(pairs_value, list):
            raise ParseError(f"{pairs_where}: expected an array or null")
        pairs = []
        for p, pair in enumerate(pairs_value):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError(f"{pairs_where}[{p}]: expected a [rest, moved] pair")
            pairs.append((int(pair[0]), int(pair[1])))
        pairs = tuple(pairs)
    return TrajectoryData(np.array(values), mode, pairs)


# ---------------------------------------------------------------------------
# identification results

def _tolerances_doc(tol: Tolerances) -> dict:
    return {f.name: getattr(tol, f.name) for f in fields(tol)}


def _tolerances_from_doc(doc, path: str) -> Tolerances:
    kwargs = {}
    for f in fields(Tolerances):
        if f.type in (int, "int"):
            kwargs[f.name] = _int(doc, f.name, path)
        else:
            kwargs[f.name] = _float(doc, f.name, path)
    return Tolerances(**kwargs)


def _test_result_doc(result: TestResult) -> dict:
    def finite_or_none(value: float):
        return float(value) if math.isfinite(value) else None

    return {
        "feasible": result.feasible,
        "inconclusive": result.inconclusive,
        "residual": finite_or_none(result.residual),
        "constraint_violation": finite_or_none(result.constraint_violation),
        "detail": result.detail,
    }


def _structure_doc(structure: KinematicStructure) -> dict:
    return {
        "marker_sequence": list(structure.marker_sequence),
        "joint_types": [t.value for t in structure.joint_types],
        "joint_signals": list(structure.joint_signals),
    }


def _structure_from_doc(doc, path: str) -> KinematicStructure:
    sequence, _ = _list(doc, "marker_sequence", path)
    types, _ = _list(doc, "joint_types", path)
    signals, _ = _list(doc, "joint_signals", path)
    return KinematicStructure(tuple(sequence), tuple(types), tuple(signals))


def write_identification_result(
    path,
    *,
    tolerances: Tolerances,
    base_marker: int,
    verdicts: list[TripletVerdict],
    structure: KinematicStructure | None = None,
    problems: list[str] = (),
    inconclusive_triplets: list[tuple[int, int, int]] = (),
) -> None:
    """Write the outcome of an identification run: the recovered structure
    (or the ambiguity diagnostics), plus per-triplet verdicts and the
    residual evidence of every test consulted."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "identification_result",
        "tool_version": __version__,
        "tolerances": _tolerances_doc(tolerances),
        "base_marker": base_marker,
        "ambiguous": structure is None,
        "structure": None if structure is None else _structure_doc(structure),
        "problems": list(problems),
        "inconclusive_triplets": [list(t) for t in inconclusive_triplets],
        "verdicts": [
            {
                "i1": v.i1,
                "i2": v.i2,
                "k": v.k,
                "kind": v.kind.value,
                "evidence": {
                    name: _test_result_doc(result)
                    for name, result in v.evidence.items()
                },
            }
            for v in verdicts
        ],
    }
    _write_doc(path, doc)


def read_identification_result(path) -> dict:
    """Read an identification result into a plain dictionary with the
    structure (when present) reconstructed as a KinematicStructure."""
    doc = _load_doc(path, "identification_result")
    root = str(path)
    tol_doc, tol_where = _field(doc, "tolerances", root)
    ambiguous = _bool(doc, "ambiguous", root)
    structure_value, structure_where = _field(doc, "structure", root)
    structure = None
    if structure_value is not None:
        structure = _structure_from_doc(structure_value, structure_where)
    if ambiguous == (structure is not None):
        raise InvariantViolationError(
            f"{root}: ambiguous flag contradicts the structure field"
        )
    problems, _ = _list(doc, "problems", root)
    inconclusive, _ = _list(doc, "inconclusive_triplets", root)
    verdicts, _ = _list(doc, "verdicts", root)
    return {
        "tool_version": _str(doc, "tool_version", root),
        "tolerances": _tolerances_from_doc(tol_doc, tol_where),
        "base_marker": _int(doc, "base_marker", root),
        "structure": structure,
        "problems": list(problems),
        "inconclusive_triplets": [tuple(t) for t in inconclusive],
        "verdicts": list(verdicts),
    }


# ---------------------------------------------------------------------------
# batch reports

def _matrix_doc(matrix: ConfusionMatrix) -> dict:
    return {
        "tp": matrix.tp,
        "fp": matrix.fp,
        "fn": matrix.fn,
        "tn": matrix.tn,
        "inconclusive": matrix.inconclusive,
    }


def _matrix_from_doc(doc, path: str) -> ConfusionMatrix:
    return ConfusionMatrix(
        tp=_int(doc, "tp", path),
        fp=_int(doc, "fp", path),
        fn=_int(doc, "fn", path),
        tn=_int(doc, "tn", path),
        inconclusive=_int(doc, "inconclusive", path),
    )


def _config_doc(cfg: McConfig) -> dict:
    return {
        "n_series": cfg.n_series,
        "n_links": cfg.n_links,
        "n_obs": cfg.n_obs,
        "amplitude_range": list(cfg.amplitude_range),
        "frequency_range": list(cfg.frequency_range),
        "sample_rate": cfg.sample_rate,
        "master_seed": cfg.master_seed,
        "type_policy": cfg.type_policy,
        "tolerances": _tolerances_doc(cfg.tolerances),
    }


def _config_from_doc(doc, path: str) -> McConfig:
    tol_doc, tol_where = _field(doc, "tolerances", path)
    return McConfig(
        n_series=_int(doc, "n_series", path),
        n_links=_int(doc, "n_links", path),
        n_obs=_int(doc, "n_obs", path),
        amplitude_range=tuple(_floats(doc, "amplitude_range", path, 2)),
        frequency_range=tuple(_floats(doc, "frequency_range", path, 2)),
        sample_rate=_float(doc, "sample_rate", path),
        master_seed=_int(doc, "master_seed", path),
        type_policy=_str(doc, "type_policy", path),
        tolerances=_tolerances_from_doc(tol_doc, tol_where),
    )


_MATRIX_FIELDS = ("prismatic", "revolute_linear", "revolute_nonlinear", "revolute_combined")


def write_mc_report(report: McReport, path) -> None:
    """Write a batch report with its full configuration echo and digest."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "mc_report",
        "tool_version": __version__,
        "config": _config_doc(report.config),
        "matrices": {
            name: _matrix_doc(getattr(report, name)) for name in _MATRIX_FIELDS
        },
        "recovered_series": report.recovered_series,
        "ambiguous_series": report.ambiguous_series,
        "recovery_rate": report.recovery_rate,
        "series_seeds": [list(pair) for pair in report.series_seeds],
        "gated_nonlinear_calls": report.gated_nonlinear_calls,
        "gated_linear_feasible": report.gated_linear_feasible,
        "timings": {
            "all_tests_seconds": report.all_tests_seconds,
            "gated_seconds": report.gated_seconds,
        },
        "digest": report.digest(),
    }
    _write_doc(path, doc)


def read_mc_report(path) -> McReport:
    """Read a batch report back; the embedded digest must match the
    reconstructed report's own digest."""
    doc = _load_doc(path, "mc_report")
    root = str(path)
    config_doc, config_where = _field(doc, "config", root)
    matrices_doc, matrices_where = _field(doc, "matrices", root)
    matrices = {}
    for name in _MATRIX_FIELDS:
        matrix_doc, matrix_where = _field(matrices_doc, name, matrices_where)
        matrices[name] = _matrix_from_doc(matrix_doc, matrix_where)
    seeds, seeds_where = _list(doc, "series_seeds", root)
    for i, pair in enumerate(seeds):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"{seeds_where}[{i}]: expected a [chain, trajectory] pair")
    timings_doc, timings_where = _field(doc, "timings", root)
    report = McReport(
        config=_config_from_doc(config_doc, config_where),
        recovered_series=_int(doc, "recovered_series", root),
        ambiguous_series=_int(doc, "ambiguous_series", root),
        series_seeds=tuple((int(a), int(b)) for a, b in seeds),
        gated_nonlinear_calls=_int(doc, "gated_nonlinear_calls", root),
        gated_linear_feasible=_int(doc, "gated_linear_feasible", root),
        all_tests_seconds=_float(timings_doc, "all_tests_seconds", timings_where),
        gated_seconds=_float(timings_doc, "gated_seconds", timings_where),
        **matrices,
    )
    declared = _str(doc, "digest", root)
    if declared != report.digest():
        raise InvariantViolationError(
            f"{root}.digest: does not match the report contents"
        )
    return report
