"""Identify the kinematic structure of a serial chain from marker poses."""

from ._version import __version__
from .errors import (
    DegenerateDisplacementError,
    DimensionMismatchError,
    FrameMismatchError,
    GimbalLockError,
    InvalidRangeError,
    InvariantViolationError,
    KinstructError,
    ParseError,
    SchemaVersionError,
    StructureAmbiguousError,
)
from .feasibility import (
    RelativeSeries,
    TestResult,
    Tolerances,
    prismatic_test,
    relative_series,
    revolute_angle_oracle,
    revolute_linear_test,
    revolute_nonlinear_test,
    rotation_constancy,
)
from .identify import (
    KinematicStructure,
    TripletVerdict,
    VerdictKind,
    assemble_chain,
    base_marker,
    classify_all,
    classify_triplet,
    enumerate_triplets,
    identify_structure,
)
from .io import (
    TrajectoryData,
    read_chain,
    read_dataset,
    read_identification_result,
    read_mc_report,
    read_trajectory,
    write_chain,
    write_dataset,
    write_identification_result,
    write_mc_report,
    write_trajectory,
)
from .montecarlo import (
    ConfusionMatrix,
    McConfig,
    McReport,
    label_triplet_truth,
    run_montecarlo,
)
from .se3 import (
    Pose,
    YprAngles,
    compose,
    dh_link_transform,
    identity_pose,
    invert,
    is_rotation,
    relative_pose,
    rot_to_ypr,
    rot_x,
    rot_y,
    rot_z,
    rotation_angle,
    wrap_angle,
    ypr_to_rot,
)
from .simulate import (
    ChainSpec,
    DhJoint,
    JointType,
    MarkerAttachment,
    ObservationSet,
    dedup_mod2pi,
    forward_markers,
    gen_fully_informative,
    gen_sinusoidal,
    observe,
    random_chain,
)

__all__ = [
    "__version__",
    "DegenerateDisplacementError",
    "DimensionMismatchError",
    "FrameMismatchError",
    "GimbalLockError",
    "InvalidRangeError",
    "InvariantViolationError",
    "KinstructError",
    "ParseError",
    "SchemaVersionError",
    "StructureAmbiguousError",
    "RelativeSeries",
    "TestResult",
    "Tolerances",
    "prismatic_test",
    "relative_series",
    "revolute_angle_oracle",
    "revolute_linear_test",
    "revolute_nonlinear_test",
    "rotation_constancy",
    "KinematicStructure",
    "TripletVerdict",
    "VerdictKind",
    "assemble_chain",
    "base_marker",
    "classify_all",
    "classify_triplet",
    "enumerate_triplets",
    "identify_structure",
    "TrajectoryData",
    "read_chain",
    "read_dataset",
    "read_identification_result",
    "read_mc_report",
    "read_trajectory",
    "write_chain",
    "write_dataset",
    "write_identification_result",
    "write_mc_report",
    "write_trajectory",
    "ConfusionMatrix",
    "McConfig",
    "McReport",
    "label_triplet_truth",
    "run_montecarlo",
    "Pose",
    "YprAngles",
    "compose",
    "dh_link_transform",
    "identity_pose",
    "invert",
    "is_rotation",
    "relative_pose",
    "rot_to_ypr",
    "rot_x",
    "rot_y",
    "rot_z",
    "rotation_angle",
    "wrap_angle",
    "ypr_to_rot",
    "ChainSpec",
    "DhJoint",
    "JointType",
    "MarkerAttachment",
    "ObservationSet",
    "dedup_mod2pi",
    "forward_markers",
    "gen_fully_informative",
    "gen_sinusoidal",
    "observe",
    "random_chain",
]
