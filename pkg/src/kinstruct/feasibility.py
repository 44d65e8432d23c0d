"""Feasibility tests for marker-pair motion hypotheses.

Each test asks whether the relative pose series of two markers, paired with
one candidate joint signal, is consistent with the markers sitting on the
two sides of a single joint driven by that signal:

* prismatic: the relative orientation is constant and the relative position
  is affine in the signal along a fixed unit axis;
* revolute (linear part): the relative position equals a constant plus the
  relative orientation applied to another constant;
* revolute (rotation part): the relative orientation factors as a fixed
  rotation, times a z-rotation by the signal, times another fixed rotation.

The linear tests are least-squares residual checks; the rotation
factorization is fit by unconstrained minimization over two
rotation-vector charts, so the orthogonality of both factors holds by
construction. Noiseless data from a correct hypothesis drives every
residual to machine precision, which is what the default tolerances aim at.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DimensionMismatchError
from .simulate import ObservationSet

# Relative cutoff deciding the numerical rank of the stacked prismatic system.
RANK_RTOL = 1e-8

# Fixed seed for the solver restarts: the restart pattern is part of the
# algorithm, not configuration, and must not vary between calls.
_RESTART_SEED = 0x1D5EED


@dataclass(frozen=True)
class Tolerances:
    """Decision thresholds and solver limits shared by all tests.

    tol_res bounds the RMS equation residual of a feasible system, tol_con
    the unit-norm constraint violation of the prismatic axis, and
    tol_const_rot the entrywise drift allowed in a "constant" relative
    orientation. max_iterations caps damping iterations per solver restart.
    """

    tol_res: float = 1e-6
    tol_con: float = 1e-6
    tol_const_rot: float = 1e-8
    multistart_count: int = 8
    max_iterations: int = 200

    def __post_init__(self):
        for name in ("tol_res", "tol_con", "tol_const_rot"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.multistart_count < 1 or self.max_iterations < 1:
            raise ValueError("multistart_count and max_iterations must be >= 1")


@dataclass(frozen=True)
class RelativeSeries:
    """Relative pose of one marker in another marker's frame over time,
    together with the candidate joint signal."""

    positions: np.ndarray  # (T, 3)
    rotations: np.ndarray  # (T, 3, 3)
    signal: np.ndarray  # (T,)

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        rotations = np.array(self.rotations, dtype=float)
        signal = np.array(self.signal, dtype=float)
        t = signal.size
        if positions.shape != (t, 3) or rotations.shape != (t, 3, 3):
            raise DimensionMismatchError(
                "positions, rotations and signal must agree on T"
            )
        for arr in (positions, rotations, signal):
            if not np.all(np.isfinite(arr)):
                raise ValueError("series entries must be finite")
            arr.flags.writeable = False
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "signal", signal)

    @property
    def n_obs(self) -> int:
        return self.signal.size


@dataclass(frozen=True)
class TestResult:
    """Outcome of one feasibility test.

    `feasible` holds only when the test reached a verdict and both the
    residual and constraint checks passed; `inconclusive` marks tests that
    could not decide (rank-deficient system, solver did not converge).
    `solution` carries the fitted unknowns: a length-6 vector for the linear
    tests, an (R_A, R_B) rotation pair for the factorization test.
    """

    feasible: bool
    residual: float
    constraint_violation: float
    solution: object | None = None
    inconclusive: bool = False
    detail: str = ""


def relative_series(obs: ObservationSet, i1: int, i2: int, k: int) -> RelativeSeries:
    """Relative pose series of marker i2 in marker i1's frame, tagged with
    signal column k."""
    n, n_sig = obs.n_markers, obs.n_signals
    for idx, limit, what in ((i1, n, "marker"), (i2, n, "marker"), (k, n_sig, "signal")):
        if not 0 <= idx < limit:
            raise IndexError(f"{what} index {idx} out of range [0, {limit})")
    if i1 == i2:
        raise ValueError("marker indices must differ")
    r1 = obs.rotations[:, i1]
    delta = obs.positions[:, i2] - obs.positions[:, i1]
    positions = np.einsum("tji,tj->ti", r1, delta)
    rotations = np.einsum("tji,tjk->tik", r1, obs.rotations[:, i2])
    return RelativeSeries(positions, rotations, obs.joint_values[:, k])


def rotation_constancy(series: RelativeSeries, tol: float = 1e-8) -> bool:
    """True when the relative orientation never drifts more than `tol`
    entrywise from its first sample. Needs at least two observations."""
    _require_pairs(series)
    drift = np.max(np.abs(series.rotations - series.rotations[0]))
    return bool(drift < tol)


def prismatic_test(series: RelativeSeries, tol: Tolerances = Tolerances()) -> TestResult:
    """Check the prismatic hypothesis.

    Builds the 3T x 6 system [I, q_t * I] b = position(t) whose solution
    stacks the constant offset and the sliding axis; feasibility additionally
    requires the relative orientation to stay constant and the fitted axis
    to have unit norm. A numerically rank-deficient system (a signal that
    never moves) cannot be decided and is reported inconclusive.
    """
    _require_pairs(series)
    drift = float(np.max(np.abs(series.rotations - series.rotations[0])))
    if drift >= tol.tol_const_rot:
        return TestResult(
            feasible=False,
            residual=math.inf,
            constraint_violation=math.inf,
            detail=f"relative orientation varies (max drift {drift:.3e})",
        )
    t = series.n_obs
    blocks = np.tile(np.eye(3), (t, 1))
    a = np.concatenate([blocks, np.repeat(series.signal, 3)[:, None] * blocks], axis=1)
    y = series.positions.ravel()
    solution, _, rank, _ = np.linalg.lstsq(a, y, rcond=RANK_RTOL)
    residual = _rms(a @ solution - y)
    violation = abs(float(np.linalg.norm(solution[3:])) - 1.0)
    if rank < 6:
        return TestResult(
            feasible=False,
            residual=residual,
            constraint_violation=violation,
            solution=solution,
            inconclusive=True,
            detail=f"stacked system has rank {rank} < 6 (constant signal?)",
        )
    return TestResult(
        feasible=residual < tol.tol_res and violation < tol.tol_con,
        residual=residual,
        constraint_violation=violation,
        solution=solution,
    )


def revolute_linear_test(series: RelativeSeries, tol: Tolerances = Tolerances()) -> TestResult:
    """Check the position part of the revolute hypothesis: the 3T x 6
    system [I, R(t)] b = position(t). Residual-only; this is a necessary
    condition that admits false positives on its own."""
    _require_pairs(series)
    t = series.n_obs
    a = np.concatenate(
        [np.tile(np.eye(3), (t, 1)), series.rotations.reshape(3 * t, 3)], axis=1
    )
    y = series.positions.ravel()
    solution, _, _, _ = np.linalg.lstsq(a, y, rcond=RANK_RTOL)
    residual = _rms(a @ solution - y)
    return TestResult(
        feasible=residual < tol.tol_res,
        residual=residual,
        constraint_violation=0.0,
        solution=solution,
    )


def revolute_nonlinear_test(series: RelativeSeries, tol: Tolerances = Tolerances()) -> TestResult:
    """Check the orientation part of the revolute hypothesis by fitting
    R(t) = R_A @ rot_z(q_t) @ R_B over two rotation-vector charts.

    A geometric construction (axis of a relative-rotation increment, then
    an orthogonal Procrustes fit for the second factor) seeds the first
    restart and solves exactly-feasible series outright; the remaining
    restarts start from deterministic pseudo-random rotations. The verdict
    is inconclusive only when no restart converges and none reaches the
    residual threshold.
    """
    _require_pairs(series)
    rz = _rot_z_stack(series.signal)
    rot_a, rot_b, cert_rms = _certificate(series.rotations, series.signal, rz)
    if cert_rms < tol.tol_res:
        return TestResult(
            feasible=True,
            residual=cert_rms,
            constraint_violation=0.0,
            solution=(rot_a, rot_b),
        )

    target = series.rotations
    rng = np.random.default_rng(_RESTART_SEED)
    starts = [np.concatenate([_rotvec_from_rot(rot_a), _rotvec_from_rot(rot_b)])]
    while len(starts) < tol.multistart_count:
        starts.append(_random_rotvec_pair(rng))

    best_x, best_rms, converged = _minimize_factorization(
        np.array(starts), rz, target, tol
    )
    best_solution = (_rot_from_rotvec(best_x[:3]), _rot_from_rotvec(best_x[3:]))
    if cert_rms < best_rms:
        best_rms = cert_rms
        best_solution = (rot_a, rot_b)

    feasible = best_rms < tol.tol_res
    if not feasible and not converged:
        return TestResult(
            feasible=False,
            residual=best_rms,
            constraint_violation=0.0,
            solution=best_solution,
            inconclusive=True,
            detail="no solver restart converged",
        )
    return TestResult(
        feasible=feasible,
        residual=best_rms,
        constraint_violation=0.0,
        solution=best_solution,
    )


def revolute_angle_oracle(series: RelativeSeries, tol: float = 1e-7) -> bool:
    """Signal-consistency cross-check for revolute pairs: for every pair of
    times, the rotation angle between the two relative orientations must
    equal the signal difference wrapped to (-pi, pi], in absolute value.
    Independent of the feasibility solvers; used to corroborate them, never
    to classify."""
    _require_pairs(series)
    rots = series.rotations
    gram = np.einsum("aij,bkj->abik", rots, rots)
    traces = np.einsum("abii->ab", gram)
    angles = np.arccos(np.clip((traces - 1.0) / 2.0, -1.0, 1.0))
    dq = series.signal[:, None] - series.signal[None, :]
    expected = np.abs(dq - math.tau * np.round(dq / math.tau))
    return bool(np.max(np.abs(angles - expected)) < tol)


def _factorization_residuals(x: np.ndarray, rz: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Entrywise defect of R_A @ rot_z(q_t) @ R_B against the target stack,
    with both factors given as rotation vectors in x."""
    return _batch_residuals(np.asarray(x, dtype=float)[None], rz, target)[0]


def _factorization_jacobian(x: np.ndarray, rz: np.ndarray, target: np.ndarray) -> np.ndarray:
    return _batch_jacobian(np.asarray(x, dtype=float)[None], rz)[0]


# Solver limits shared by every factorization fit: the gradient threshold is
# part of the convergence criterion, the damping bounds only guard against
# stalled iterations.
_SOLVER_GRAD_TOL = 1e-10
_SOLVER_LAMBDA_INIT = 1e-3
_SOLVER_LAMBDA_MAX = 1e12


def _minimize_factorization(
    starts: np.ndarray, rz: np.ndarray, target: np.ndarray, tol: Tolerances
) -> tuple[np.ndarray, float, bool]:
    """Minimize the factorization defect from several starts at once.

    Levenberg-Marquardt on the stacked chart vector (w_A, w_B), with all
    restarts advanced in lockstep so the linear algebra batches. A restart
    counts as converged once its gradient infinity-norm drops below 1e-10 or
    its RMS residual passes tol.tol_res; exhausting the iteration budget or
    the damping range does not count. Returns the best parameter vector, its
    RMS residual, and whether any restart converged.
    """
    x = np.array(starts, dtype=float)
    n_starts = x.shape[0]
    n_rows = 9 * rz.shape[0]
    residuals = _batch_residuals(x, rz, target)
    cost = np.einsum("bm,bm->b", residuals, residuals)
    lam = np.full(n_starts, _SOLVER_LAMBDA_INIT)
    grad = np.empty((n_starts, 6))
    hess = np.empty((n_starts, 6, 6))
    converged = np.zeros(n_starts, dtype=bool)
    active = np.ones(n_starts, dtype=bool)
    stale = np.ones(n_starts, dtype=bool)  # x moved since the last linearization
    best_converged_cost = math.inf

    converged[np.sqrt(cost / n_rows) < tol.tol_res] = True
    active &= ~converged

    for _ in range(tol.max_iterations):
        if converged.any() and np.sqrt(cost[converged].min() / n_rows) < tol.tol_res:
            break  # a restart already certifies feasibility
        refresh = np.flatnonzero(active & stale)
        if refresh.size:
            jac = _batch_jacobian(x[refresh], rz)
            grad[refresh] = np.einsum("bmi,bm->bi", jac, residuals[refresh])
            hess[refresh] = np.einsum("bmi,bmj->bij", jac, jac)
            stale[refresh] = False
            flat = refresh[np.max(np.abs(grad[refresh]), axis=1) < _SOLVER_GRAD_TOL]
            if flat.size:
                converged[flat] = True
                active[flat] = False
                best_converged_cost = min(best_converged_cost, float(cost[flat].min()))
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        damped = hess[idx].copy()
        diag = np.einsum("bii->bi", damped)
        diag += lam[idx, None] * np.clip(diag, 1e-12, None)
        try:
            step = np.linalg.solve(damped, grad[idx, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            lam[idx] *= 4.0
            active[idx] = lam[idx] < _SOLVER_LAMBDA_MAX
            continue
        trial = _rewrap_charts(x[idx] - step)
        trial_residuals = _batch_residuals(trial, rz, target)
        trial_cost = np.einsum("bm,bm->b", trial_residuals, trial_residuals)
        better = trial_cost < cost[idx]
        accepted = idx[better]
        x[accepted] = trial[better]
        residuals[accepted] = trial_residuals[better]
        cost[accepted] = trial_cost[better]
        lam[accepted] = np.maximum(lam[accepted] / 3.0, 1e-14)
        stale[accepted] = True
        # Near a minimum the cost change drops below double-precision
        # resolution before the gradient threshold is met; for such ties,
        # accept the step iff it shrinks the gradient (still monotone, and
        # the Newton-like steps contract the gradient quadratically). Ties
        # at a cost some converged restart already certifies add nothing:
        # those restarts stop instead of polishing a duplicate minimum.
        tied = np.flatnonzero(
            ~better & (trial_cost <= cost[idx] * (1.0 + 64.0 * np.finfo(float).eps))
        )
        if tied.size:
            worth = trial_cost[tied] < best_converged_cost * (1.0 - 1e-12)
            active[idx[tied[~worth]]] = False
            tied = tied[worth]
        if tied.size:
            tied_idx = idx[tied]
            tied_jac = _batch_jacobian(trial[tied], rz)
            tied_grad = np.einsum("bmi,bm->bi", tied_jac, trial_residuals[tied])
            shrunk = (
                np.max(np.abs(tied_grad), axis=1) < np.max(np.abs(grad[tied_idx]), axis=1)
            )
            polish = tied_idx[shrunk]
            x[polish] = trial[tied][shrunk]
            residuals[polish] = trial_residuals[tied][shrunk]
            cost[polish] = trial_cost[tied][shrunk]
            grad[polish] = tied_grad[shrunk]
            hess[polish] = np.einsum("bmi,bmj->bij", tied_jac, tied_jac)[shrunk]
            stale[polish] = False
            lam[polish] = np.maximum(lam[polish] / 3.0, 1e-14)
            flat = polish[np.max(np.abs(grad[polish]), axis=1) < _SOLVER_GRAD_TOL]
            if flat.size:
                converged[flat] = True
                active[flat] = False
                best_converged_cost = min(best_converged_cost, float(cost[flat].min()))
            better = better.copy()
            better[tied[shrunk]] = True
        rejected = idx[~better]
        lam[rejected] *= 4.0
        flat = accepted[np.sqrt(cost[accepted] / n_rows) < tol.tol_res]
        converged[flat] = True
        active[flat] = False
        active[rejected] &= lam[rejected] < _SOLVER_LAMBDA_MAX

    best = int(np.argmin(cost))
    return x[best], float(np.sqrt(cost[best] / n_rows)), bool(converged.any())


def _rewrap_charts(x: np.ndarray) -> np.ndarray:
    """Map each rotation-vector half of (w_A, w_B) rows back inside the ball
    of radius pi (same rotation, shorter vector), keeping the chart away from
    its singularity at 2*pi."""
    for half in (x[:, :3], x[:, 3:]):
        norm = np.linalg.norm(half, axis=1)
        wrap = norm > math.pi
        if wrap.any():
            turns = np.round(norm[wrap] / math.tau)
            half[wrap] *= ((norm[wrap] - math.tau * turns) / norm[wrap])[:, None]
    return x


def _require_pairs(series: RelativeSeries) -> None:
    if series.n_obs < 2:
        raise ValueError("need at least two observations")


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values))))


def _rot_z_stack(angles: np.ndarray) -> np.ndarray:
    c, s = np.cos(angles), np.sin(angles)
    out = np.zeros((angles.size, 3, 3))
    out[:, 0, 0] = c
    out[:, 0, 1] = -s
    out[:, 1, 0] = s
    out[:, 1, 1] = c
    out[:, 2, 2] = 1.0
    return out


def _batch_skew(v: np.ndarray) -> np.ndarray:
    out = np.zeros((v.shape[0], 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _batch_rot_from_rotvec(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula on (B, 3) rotation vectors; series expansions keep
    the coefficients smooth through zero angle."""
    theta2 = np.einsum("bi,bi->b", w, w)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    safe2 = np.where(small, 1.0, theta2)
    sin_c = np.where(small, 1.0 - theta2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
    cos_c = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(theta)) / safe2)
    k = _batch_skew(w)
    out = k @ k
    out *= cos_c[:, None, None]
    out += sin_c[:, None, None] * k
    out.reshape(w.shape[0], 9)[:, ::4] += 1.0
    return out


def _batch_left_jacobian(w: np.ndarray) -> np.ndarray:
    """Left Jacobian of the rotation-vector chart on (B, 3) vectors:
    exp(w + dw) equals exp([J_l(w) dw]x) exp(w) to first order."""
    theta2 = np.einsum("bi,bi->b", w, w)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    safe2 = np.where(small, 1.0, theta2)
    c1 = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(theta)) / safe2)
    c2 = np.where(small, 1.0 / 6.0 - theta2 / 120.0, (theta - np.sin(theta)) / (safe2 * np.where(small, 1.0, theta)))
    k = _batch_skew(w)
    out = k @ k
    out *= c2[:, None, None]
    out += c1[:, None, None] * k
    out.reshape(w.shape[0], 9)[:, ::4] += 1.0
    return out


def _batch_residuals(x: np.ndarray, rz: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Stacked factorization defects for (B, 6) chart vectors: rows of the
    result flatten R_A @ rot_z(q_t) @ R_B - R(t) over all t."""
    ra = _batch_rot_from_rotvec(x[:, :3])
    rb = _batch_rot_from_rotvec(x[:, 3:])
    stacks = ra[:, None] @ (rz[None] @ rb[:, None])
    return (stacks - target[None]).reshape(x.shape[0], -1)


def _batch_jacobian(x: np.ndarray, rz: np.ndarray) -> np.ndarray:
    """Analytic (B, 9T, 6) Jacobian of _batch_residuals in the two charts."""
    ra = _batch_rot_from_rotvec(x[:, :3])
    rb = _batch_rot_from_rotvec(x[:, 3:])
    q_stack = ra[:, None] @ rz[None]  # (B, T, 3, 3)
    p_stack = q_stack @ rb[:, None]
    ja = _batch_left_jacobian(x[:, :3])
    jb = _batch_left_jacobian(x[:, 3:])
    cols = np.empty((x.shape[0], 6, 9 * rz.shape[0]))
    for j in range(3):
        # d/dw_A: [J_l(w_A) e_j]x applied on the left of the product
        skew_a = _batch_skew(ja[:, :, j])
        cols[:, j] = (skew_a[:, None] @ p_stack).reshape(x.shape[0], -1)
        # d/dw_B: [J_l(w_B) e_j]x R_B applied after R_A rot_z(q_t)
        skew_b = _batch_skew(jb[:, :, j]) @ rb
        cols[:, 3 + j] = (q_stack @ skew_b[:, None]).reshape(x.shape[0], -1)
    return np.transpose(cols, (0, 2, 1))


def _rot_from_rotvec(w: np.ndarray) -> np.ndarray:
    return _batch_rot_from_rotvec(np.asarray(w, dtype=float)[None])[0]


def _rotvec_from_rot(rot: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(rot).as_rotvec()


def _random_rotvec_pair(rng: np.random.Generator) -> np.ndarray:
    out = np.empty(6)
    for half in (slice(0, 3), slice(3, 6)):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        out[half] = direction * rng.uniform(0.0, math.pi)
    return out


def _project_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    return u @ np.diag([1.0, 1.0, float(np.linalg.det(u @ vt))]) @ vt


def _rot_taking_z_to(v: np.ndarray) -> np.ndarray:
    c = float(v[2])
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        return np.diag([1.0, -1.0, -1.0])  # half turn about x
    axis = np.array([-v[1], v[0], 0.0])
    axis /= np.linalg.norm(axis)
    return _rot_from_rotvec(axis * math.acos(max(-1.0, min(1.0, c))))


def _certificate(
    rots: np.ndarray, signal: np.ndarray, rz: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Deterministic closed-form candidate for the rotation factorization.

    If the factorization holds exactly, the increment R(t1) @ R(t2).T is a
    rotation about the first factor's z-axis by the wrapped signal
    difference; that fixes R_A up to a z-spin, which the second factor
    absorbs. R_B then follows from a Procrustes average. On infeasible data
    the returned candidate simply scores a large residual.
    """
    dq = signal[:, None] - signal[None, :]
    dq -= math.tau * np.round(dq / math.tau)
    a, b = np.unravel_index(int(np.argmax(np.abs(dq))), dq.shape)
    delta = float(dq[a, b])

    def fit_second_factor(rot_a: np.ndarray) -> tuple[np.ndarray, float]:
        # per-sample candidates rot_z(q_t).T @ rot_a.T @ R(t)
        candidates = np.einsum("tji,kj,tkl->til", rz, rot_a, rots)
        rot_b = _project_rotation(candidates.sum(axis=0))
        rms = _rms(np.einsum("ij,tjk,kl->til", rot_a, rz, rot_b) - rots)
        return rot_b, rms

    if abs(delta) < 1e-12:
        # signal constant modulo full turns: any constant orientation fits
        rot_a = np.eye(3)
        rot_b, rms = fit_second_factor(rot_a)
        return rot_a, rot_b, rms
    increment = rots[a] @ rots[b].T
    w = Rotation.from_matrix(increment).as_rotvec()
    norm = float(np.linalg.norm(w))
    axis = w / norm if norm > 1e-12 else np.array([0.0, 0.0, 1.0])
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for sign in (math.copysign(1.0, delta), -math.copysign(1.0, delta)):
        rot_a = _rot_taking_z_to(sign * axis)
        rot_b, rms = fit_second_factor(rot_a)
        if best is None or rms < best[2]:
            best = (rot_a, rot_b, rms)
    return best
