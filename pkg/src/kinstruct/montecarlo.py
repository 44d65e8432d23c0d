"""Batch experiment harness over randomly drawn chains.

Each series draws a random chain, drives it with sinusoidal joint signals,
and evaluates every (marker pair, signal) triplet twice: once with all three
feasibility tests (to populate one confusion matrix per test, plus the
combined revolute matrix), and once through the gated classifier (timed
separately, to measure how often the expensive rotation fit is avoided).
The end-to-end identification is compared against the generating chain.

Reports are deterministic given the configuration: per-series seeds are
drawn up front from the master seed, and the volatile timing fields are
excluded from the report digest.
"""

import hashlib
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .feasibility import (
    Tolerances,
    prismatic_test,
    relative_series,
    revolute_linear_test,
    revolute_nonlinear_test,
)
from .identify import (
    VerdictKind,
    assemble_chain,
    base_marker,
    classify_triplet,
    enumerate_triplets,
)
from .errors import StructureAmbiguousError
from .simulate import (
    ChainSpec,
    JointType,
    dedup_mod2pi,
    gen_sinusoidal,
    observe,
    random_chain,
)


@dataclass(frozen=True)
class McConfig:
    """Configuration of one batch run."""

    n_series: int = 128
    n_links: int = 6
    n_obs: int = 50
    amplitude_range: tuple[float, float] = (0.2, 1.0)
    frequency_range: tuple[float, float] = (0.1, 1.0)
    sample_rate: float = 10.0
    tolerances: Tolerances = field(default_factory=Tolerances)
    master_seed: int = 0
    type_policy: str = "random"

    def __post_init__(self):
        for name in ("n_series", "n_links", "n_obs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_links < 2:
            raise ValueError("chains need at least two links")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "amplitude_range", tuple(self.amplitude_range))
        object.__setattr__(self, "frequency_range", tuple(self.frequency_range))


@dataclass
class ConfusionMatrix:
    """2x2 prediction-vs-truth counts with a separate inconclusive tally."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    inconclusive: int = 0

    def record(self, predicted: bool | None, actual: bool) -> None:
        """Count one evaluation; predicted None means the test was undecided."""
        if predicted is None:
            self.inconclusive += 1
        elif predicted and actual:
            self.tp += 1
        elif predicted:
            self.fp += 1
        elif actual:
            self.fn += 1
        else:
            self.tn += 1

    @property
    def conclusive_total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def total(self) -> int:
        return self.conclusive_total + self.inconclusive

    def as_counts(self) -> tuple[int, int, int, int]:
        return (self.tp, self.fp, self.fn, self.tn)


@dataclass(frozen=True)
class McReport:
    """Aggregated batch results.

    One confusion matrix per feasibility test, the combined revolute matrix
    (position system AND rotation factorization), end-to-end recovery
    counts, gating statistics, and wall-clock timings. Timings are the only
    non-deterministic fields and are excluded from digest().
    """

    config: McConfig
    prismatic: ConfusionMatrix
    revolute_linear: ConfusionMatrix
    revolute_nonlinear: ConfusionMatrix
    revolute_combined: ConfusionMatrix
    recovered_series: int
    ambiguous_series: int
    series_seeds: tuple[tuple[int, int], ...]
    gated_nonlinear_calls: int
    gated_linear_feasible: int
    all_tests_seconds: float
    gated_seconds: float

    def __post_init__(self):
        matrices = (
            self.prismatic,
            self.revolute_linear,
            self.revolute_nonlinear,
            self.revolute_combined,
        )
        if any(count < 0 for m in matrices for count in (*m.as_counts(), m.inconclusive)):
            raise ValueError("confusion-matrix counts must be non-negative")
        if self.revolute_combined.fp > min(
            self.revolute_linear.fp, self.revolute_nonlinear.fp
        ):
            raise ValueError(
                "combined revolute false positives exceed an individual test's"
            )
        if not 0 <= self.recovered_series + self.ambiguous_series <= self.config.n_series:
            raise ValueError("recovery counts exceed the series count")
        object.__setattr__(
            self, "series_seeds", tuple((int(a), int(b)) for a, b in self.series_seeds)
        )

    @property
    def recovery_rate(self) -> float:
        return self.recovered_series / self.config.n_series

    def digest(self) -> str:
        """Hex digest of every deterministic field; two runs of the same
        configuration must agree on it bit-for-bit."""
        tol = self.config.tolerances
        payload = (
            tuple(
                getattr(self.config, f.name)
                for f in fields(self.config)
                if f.name != "tolerances"
            ),
            tuple(getattr(tol, f.name) for f in fields(tol)),
            tuple((*m.as_counts(), m.inconclusive) for m in (
                self.prismatic,
                self.revolute_linear,
                self.revolute_nonlinear,
                self.revolute_combined,
            )),
            self.recovered_series,
            self.ambiguous_series,
            self.series_seeds,
            self.gated_nonlinear_calls,
            self.gated_linear_feasible,
        )
        return hashlib.sha256(repr(payload).encode()).hexdigest()


def label_triplet_truth(chain: ChainSpec, i1: int, i2: int, k: int) -> VerdictKind:
    """Ground-truth class of a triplet under the generating chain: the joint
    type when the markers sit on consecutive links AND the signal drives the
    joint between them, else not-connected (the triplet, not the pair, is
    the classification unit)."""
    l1, l2 = chain.link_of_marker(i1), chain.link_of_marker(i2)
    if abs(l1 - l2) != 1:
        return VerdictKind.NOT_CONNECTED
    joint = min(l1, l2) - 1  # 0-based position of the joint between the links
    if chain.joint_signal_permutation[joint] != k:
        return VerdictKind.NOT_CONNECTED
    if chain.joints[joint].joint_type is JointType.PRISMATIC:
        return VerdictKind.PRISMATIC
    return VerdictKind.REVOLUTE


def run_montecarlo(cfg: McConfig, progress=None) -> McReport:
    """Run the full batch and aggregate the report.

    `progress`, when given, is called as progress(done, total) after each
    series. The returned report is bit-deterministic for a fixed config
    except for the two wall-clock timing fields.
    """
    rng = np.random.default_rng(cfg.master_seed)
    seeds = rng.integers(2**32, size=(cfg.n_series, 2))
    tol = cfg.tolerances
    triplets = enumerate_triplets(cfg.n_links)

    prismatic = ConfusionMatrix()
    linear = ConfusionMatrix()
    nonlinear = ConfusionMatrix()
    combined = ConfusionMatrix()
    recovered = 0
    ambiguous = 0
    gated_nonlinear_calls = 0
    gated_linear_feasible = 0
    all_tests_seconds = 0.0
    gated_seconds = 0.0

    for index in range(cfg.n_series):
        chain_seed, traj_seed = (int(s) for s in seeds[index])
        chain = random_chain(chain_seed, cfg.n_links, type_policy=cfg.type_policy)
        trajectory = gen_sinusoidal(
            cfg.n_links - 1,
            cfg.n_obs,
            amplitude_range=cfg.amplitude_range,
            frequency_range=cfg.frequency_range,
            seed=traj_seed,
            sample_rate=cfg.sample_rate,
        )
        revolute_signals = [
            cfg_signal
            for joint, cfg_signal in zip(chain.joints, chain.joint_signal_permutation)
            if joint.joint_type is JointType.REVOLUTE
        ]
        trajectory = dedup_mod2pi(trajectory, revolute_columns=revolute_signals)
        obs = observe(
            chain,
            trajectory,
            times=np.arange(trajectory.shape[0]) / cfg.sample_rate,
        )

        started = time.perf_counter()
        for i1, i2, k in triplets:
            truth = label_triplet_truth(chain, i1, i2, k)
            series = relative_series(obs, i1, i2, k)
            pri = prismatic_test(series, tol)
            lin = revolute_linear_test(series, tol)
            non = revolute_nonlinear_test(series, tol)
            prismatic.record(
                None if pri.inconclusive else pri.feasible,
                truth is VerdictKind.PRISMATIC,
            )
            revolute_truth = truth is VerdictKind.REVOLUTE
            linear.record(lin.feasible, revolute_truth)
            nonlinear.record(
                None if non.inconclusive else non.feasible, revolute_truth
            )
            if not lin.feasible:
                both = False  # the position system alone settles it
            elif non.inconclusive:
                both = None
            else:
                both = non.feasible
            combined.record(both, revolute_truth)
        all_tests_seconds += time.perf_counter() - started

        started = time.perf_counter()
        verdicts = []
        for i1, i2, k in triplets:
            verdict = classify_triplet(obs, i1, i2, k, tol)
            verdicts.append(verdict)
            gated_nonlinear_calls += "revolute_nonlinear" in verdict.evidence
            linear_evidence = verdict.evidence.get("revolute_linear")
            gated_linear_feasible += bool(linear_evidence and linear_evidence.feasible)
        try:
            structure = assemble_chain(verdicts, base_marker(obs))
        except StructureAmbiguousError:
            ambiguous += 1
        else:
            truth_sequence = tuple(
                chain.marker_of_link(link) for link in range(1, cfg.n_links + 1)
            )
            truth_types = tuple(joint.joint_type for joint in chain.joints)
            if (
                structure.marker_sequence == truth_sequence
                and structure.joint_types == truth_types
                and structure.joint_signals == chain.joint_signal_permutation
            ):
                recovered += 1
        gated_seconds += time.perf_counter() - started

        if progress is not None:
            progress(index + 1, cfg.n_series)

    return McReport(
        config=cfg,
        prismatic=prismatic,
        revolute_linear=linear,
        revolute_nonlinear=nonlinear,
        revolute_combined=combined,
        recovered_series=recovered,
        ambiguous_series=ambiguous,
        series_seeds=tuple((int(a), int(b)) for a, b in seeds),
        gated_nonlinear_calls=gated_nonlinear_calls,
        gated_linear_feasible=gated_linear_feasible,
        all_tests_seconds=all_tests_seconds,
        gated_seconds=gated_seconds,
    )
