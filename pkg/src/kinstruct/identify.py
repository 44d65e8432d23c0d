"""Triplet classification and assembly of the identified chain.

Every (marker pair, joint signal) triplet is scored against the feasibility
tests in a gated order: the cheap prismatic check first, then the revolute
position system, and the rotation-factorization fit only when the position
system passes. The positive verdicts form a graph over the markers; a valid
identification is a simple path through all of them, anchored at the marker
that never moves (the base link is rigid in the world for a fixed camera),
with every edge driven by a distinct signal.
"""

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DimensionMismatchError, StructureAmbiguousError
from .feasibility import (
    TestResult,
    Tolerances,
    prismatic_test,
    relative_series,
    revolute_linear_test,
    revolute_nonlinear_test,
)
from .simulate import JointType, ObservationSet


class VerdictKind(str, Enum):
    PRISMATIC = "prismatic"
    REVOLUTE = "revolute"
    NOT_CONNECTED = "not_connected"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TripletVerdict:
    """Classification of one (marker pair, signal) triplet.

    `evidence` maps test names ("prismatic", "revolute_linear",
    "revolute_nonlinear") to the TestResult of each test actually run; the
    gated flow means later entries may be absent. A positive verdict must be
    backed by its feasible test results.
    """

    i1: int
    i2: int
    k: int
    kind: VerdictKind
    evidence: Mapping[str, TestResult]

    def __post_init__(self):
        if not 0 <= self.i1 < self.i2:
            raise ValueError("marker indices must satisfy 0 <= i1 < i2")
        if self.k < 0:
            raise ValueError("signal index must be >= 0")
        evidence = MappingProxyType(dict(self.evidence))
        object.__setattr__(self, "evidence", evidence)
        if self.kind is VerdictKind.PRISMATIC and not evidence["prismatic"].feasible:
            raise ValueError("prismatic verdict without a feasible prismatic test")
        if self.kind is VerdictKind.REVOLUTE and not (
            evidence["revolute_linear"].feasible
            and evidence["revolute_nonlinear"].feasible
        ):
            raise ValueError("revolute verdict without both revolute tests feasible")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i1, self.i2)


@dataclass(frozen=True)
class KinematicStructure:
    """Identified serial chain.

    `marker_sequence` orders the markers from the base link to the tip;
    `joint_types[j]` and `joint_signals[j]` describe the joint between
    markers j and j+1 of that sequence. Signals are injective: each drives
    exactly one joint.
    """

    marker_sequence: tuple[int, ...]
    joint_types: tuple[JointType, ...]
    joint_signals: tuple[int, ...]

    def __post_init__(self):
        sequence = tuple(int(i) for i in self.marker_sequence)
        types = tuple(JointType(t) for t in self.joint_types)
        signals = tuple(int(k) for k in self.joint_signals)
        n = len(sequence)
        if n < 2:
            raise ValueError("a chain needs at least two markers")
        if sorted(sequence) != list(range(n)):
            raise ValueError("marker_sequence must be a permutation of 0..n-1")
        if len(types) != n - 1 or len(signals) != n - 1:
            raise DimensionMismatchError(
                f"{n} markers require {n - 1} joint types and signals"
            )
        if len(set(signals)) != len(signals):
            raise ValueError("joint_signals must be injective")
        object.__setattr__(self, "marker_sequence", sequence)
        object.__setattr__(self, "joint_types", types)
        object.__setattr__(self, "joint_signals", signals)

    @property
    def n_links(self) -> int:
        return len(self.marker_sequence)


def enumerate_triplets(n: int) -> list[tuple[int, int, int]]:
    """All classification units over n markers: unordered marker pairs
    (i1 < i2) crossed with the n-1 signal columns."""
    if n < 2:
        raise ValueError("need at least two markers")
    return [
        (i1, i2, k)
        for i1, i2 in combinations(range(n), 2)
        for k in range(n - 1)
    ]


def classify_triplet(
    obs: ObservationSet, i1: int, i2: int, k: int, tol: Tolerances = Tolerances()
) -> TripletVerdict:
    """Classify one triplet with the gated test order.

    The prismatic check runs first; only when it is conclusively infeasible
    does the revolute position system run, and the expensive rotation
    factorization only when the position system passes. An inconclusive
    prismatic test (rank-deficient: the signal never moves) poisons every
    hypothesis, so the verdict is inconclusive without running the rest.
    """
    if not i1 < i2:
        raise ValueError("marker indices must satisfy i1 < i2")
    series = relative_series(obs, i1, i2, k)
    evidence: dict[str, TestResult] = {}
    evidence["prismatic"] = prismatic = prismatic_test(series, tol)
    if prismatic.feasible:
        return TripletVerdict(i1, i2, k, VerdictKind.PRISMATIC, evidence)
    if prismatic.inconclusive:
        return TripletVerdict(i1, i2, k, VerdictKind.INCONCLUSIVE, evidence)
    evidence["revolute_linear"] = linear = revolute_linear_test(series, tol)
    if not linear.feasible:
        return TripletVerdict(i1, i2, k, VerdictKind.NOT_CONNECTED, evidence)
    evidence["revolute_nonlinear"] = nonlinear = revolute_nonlinear_test(series, tol)
    if nonlinear.feasible:
        return TripletVerdict(i1, i2, k, VerdictKind.REVOLUTE, evidence)
    if nonlinear.inconclusive:
        return TripletVerdict(i1, i2, k, VerdictKind.INCONCLUSIVE, evidence)
    return TripletVerdict(i1, i2, k, VerdictKind.NOT_CONNECTED, evidence)


def classify_all(
    obs: ObservationSet, tol: Tolerances = Tolerances()
) -> list[TripletVerdict]:
    """Classify every enumerated triplet of the observation set."""
    return [
        classify_triplet(obs, i1, i2, k, tol)
        for i1, i2, k in enumerate_triplets(obs.n_markers)
    ]


def base_marker(obs: ObservationSet) -> int:
    """Index of the marker with the least total pose variation.

    Variation is the largest position deviation from the first sample plus
    the largest rotation angle relative to the first sample. With a fixed
    camera the base link's marker never moves, scoring exactly zero on
    noiseless data; ties resolve to the lowest index.
    """
    deviations = np.linalg.norm(obs.positions - obs.positions[0], axis=2)  # (T, n)
    relative = np.einsum("nji,tnjk->tnik", obs.rotations[0], obs.rotations)
    traces = np.einsum("tnii->tn", relative)
    angles = np.arccos(np.clip((traces - 1.0) / 2.0, -1.0, 1.0))
    scores = deviations.max(axis=0) + angles.max(axis=0)
    return int(np.argmin(scores))


def assemble_chain(
    verdicts: list[TripletVerdict], base: int
) -> KinematicStructure:
    """Reduce a complete verdict list to the identified chain.

    The positive verdicts must form a simple path visiting every marker,
    with the base marker at one end and an injective signal assignment;
    anything else raises StructureAmbiguousError carrying all detected
    problems and the list of inconclusive triplets.
    """
    if not verdicts:
        raise ValueError("verdict list is empty")
    n = 1 + max(max(v.i2 for v in verdicts), base)
    inconclusive = [
        (v.i1, v.i2, v.k) for v in verdicts if v.kind is VerdictKind.INCONCLUSIVE
    ]
    problems: list[str] = []

    edges: dict[tuple[int, int], tuple[JointType, int]] = {}
    for verdict in verdicts:
        if verdict.kind is VerdictKind.PRISMATIC:
            joint_type = JointType.PRISMATIC
        elif verdict.kind is VerdictKind.REVOLUTE:
            joint_type = JointType.REVOLUTE
        else:
            continue
        if verdict.pair in edges:
            kind0, k0 = edges[verdict.pair]
            problems.append(
                f"markers {verdict.pair} classified positively more than once: "
                f"({kind0.value}, signal {k0}) and "
                f"({joint_type.value}, signal {verdict.k})"
            )
            continue
        edges[verdict.pair] = (joint_type, verdict.k)

    if len(edges) != n - 1:
        problems.append(f"found {len(edges)} edges, expected {n - 1}")
    signal_edges = defaultdict(list)
    for pair, (_, k) in edges.items():
        signal_edges[k].append(pair)
    for k, pairs in sorted(signal_edges.items()):
        if len(pairs) > 1:
            problems.append(f"signal {k} drives multiple edges: {sorted(pairs)}")

    neighbors = defaultdict(list)
    for i1, i2 in edges:
        neighbors[i1].append(i2)
        neighbors[i2].append(i1)
    for marker in range(n):
        if len(neighbors[marker]) > 2:
            problems.append(
                f"marker {marker} borders {len(neighbors[marker])} edges (branch)"
            )
        elif not neighbors[marker]:
            problems.append(f"marker {marker} is isolated (missing edge)")
    if problems:
        raise StructureAmbiguousError(problems, inconclusive)

    if len(neighbors[base]) != 1:
        raise StructureAmbiguousError(
            [f"base marker {base} is not a path endpoint"], inconclusive
        )
    sequence = [base]
    while len(sequence) < n:
        nxt = [m for m in neighbors[sequence[-1]] if len(sequence) < 2 or m != sequence[-2]]
        if len(nxt) != 1 or nxt[0] in sequence:
            raise StructureAmbiguousError(
                ["positive verdicts do not form a simple path (cycle)"], inconclusive
            )
        sequence.append(nxt[0])

    labels = [
        edges[tuple(sorted((sequence[j], sequence[j + 1])))] for j in range(n - 1)
    ]
    return KinematicStructure(
        tuple(sequence),
        tuple(joint_type for joint_type, _ in labels),
        tuple(k for _, k in labels),
    )


def identify_structure(
    obs: ObservationSet, tol: Tolerances = Tolerances()
) -> KinematicStructure:
    """Full identification: classify every triplet, anchor the chain at the
    static marker, and assemble the marker, joint-type and signal sequences."""
    return assemble_chain(classify_all(obs, tol), base_marker(obs))
