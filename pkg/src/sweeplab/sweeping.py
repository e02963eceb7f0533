"""Catching-up integration of dz/dt in -N_{C(t)}(z) and convergence diagnostics.

The integrator is the classical catching-up scheme: project the previous
state (plus an explicit-Euler drift increment) onto the set frozen at the end
of the step. The step size h = T/M divides the period exactly and all signal
breakpoints must lie on the grid; offsets are evaluated once per grid phase,
so the discrete system is exactly T-periodic and finite-time convergence can
be tested at tolerances near machine precision instead of O(h).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GridAlignmentError, InadmissibleStateError, LicqError
from .polyhedra import (
    DEFAULT_TOL,
    FrozenPolyhedron,
    MovingPolyhedron,
    _project_raw,
    _subset_table,
    project,
)
from .signals import PeriodicSignal, eval_many

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SweepingProblem:
    """A moving polyhedron plus an optional additive drift term."""

    moving_set: MovingPolyhedron
    drift: tuple | None = None

    def __post_init__(self):
        if self.drift is not None:
            drift = tuple(self.drift)
            if len(drift) != self.moving_set.dim:
                raise ValueError("drift needs one signal per coordinate")
            for s in drift:
                if abs(s.period - self.period) > 1e-12 * max(1.0, self.period):
                    raise ValueError("drift signals must share the moving-set period")
            object.__setattr__(self, "drift", drift)

    @property
    def period(self) -> float:
        return self.moving_set.period

    @property
    def dim(self) -> int:
        return self.moving_set.dim

    def to_json(self) -> dict:
        return {
            "moving_set": self.moving_set.to_json(),
            "drift": None if self.drift is None else [s.to_json() for s in self.drift],
        }

    @staticmethod
    def from_json(obj: dict) -> "SweepingProblem":
        drift = obj.get("drift")
        return SweepingProblem(
            MovingPolyhedron.from_json(obj["moving_set"]),
            None if drift is None else tuple(PeriodicSignal.from_json(s) for s in drift),
        )


@dataclass(frozen=True)
class Trajectory:
    """Discrete solution record of a catching-up run.

    states has Q*M+1 rows; multipliers row k holds the projection multipliers
    of the step landing at states[k+1]; active_masks[k] is the bitmask of the
    active set at states[k] against the set frozen at t_k.
    """

    problem: SweepingProblem
    t0: float
    h: float
    steps_per_period: int
    states: np.ndarray = field(repr=False)
    multipliers: np.ndarray = field(repr=False)
    active_masks: np.ndarray = field(repr=False)

    @property
    def periods(self) -> int:
        return (len(self.states) - 1) // self.steps_per_period

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.states)) * self.h

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def _phase_times(t0: float, h: float, M: int) -> np.ndarray:
    return t0 + np.arange(M) * h


def _check_alignment(signals, t0: float, h: float, label: str) -> None:
    for i, s in enumerate(signals):
        r = (s.times - t0) / h
        off = np.abs(r - np.round(r))
        if np.any(off > 1e-6):
            bad = s.times[int(np.argmax(off))]
            raise GridAlignmentError(
                f"{label}[{i}] breakpoint t={bad} is not on the grid (t0={t0}, h={h})"
            )


def _active_mask(B, c, z, tol) -> int:
    resid = c - B @ z
    mask = 0
    for i in np.flatnonzero(resid <= tol):
        mask |= 1 << int(i)
    return mask


def step(F_next: FrozenPolyhedron, z, drift_value, h: float, tol: float = DEFAULT_TOL):
    """One catching-up step: project z + h*drift onto the next frozen set."""
    z = np.asarray(z, dtype=float)
    p = z if drift_value is None else z + h * np.asarray(drift_value, dtype=float)
    res = project(F_next, p, tol)
    return res.point, res.multipliers


def simulate(
    problem: SweepingProblem,
    z0,
    t0: float,
    periods: int,
    steps_per_period: int,
    tol: float = DEFAULT_TOL,
) -> Trajectory:
    """Run Q*M catching-up steps with h = T/M from an admissible state.

    Offsets and drift are evaluated at the M grid phases once, so offsets are
    bit-identical across periods and the discrete flow is exactly periodic.
    The drift is evaluated at the left endpoint of each step.
    """
    if periods < 1 or steps_per_period < 1:
        raise ValueError("periods and steps_per_period must be positive")
    P = problem.moving_set
    T = problem.period
    M = int(steps_per_period)
    h = T / M
    _check_alignment(P.offsets, t0, h, "offset")
    if problem.drift is not None:
        _check_alignment(problem.drift, t0, h, "drift")

    B = P.normals
    m, n = B.shape
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (n,):
        raise ValueError(f"initial state has shape {z0.shape}, expected ({n},)")

    phases = _phase_times(t0, h, M)
    offsets_phase = np.column_stack([eval_many(s, phases) for s in P.offsets])
    drift_phase = None
    if problem.drift is not None:
        drift_phase = np.column_stack([eval_many(s, phases) for s in problem.drift])

    if np.any(B @ z0 > offsets_phase[0] + tol):
        worst = float(np.max(B @ z0 - offsets_phase[0]))
        raise InadmissibleStateError(
            f"inadmissible initial state: constraint violation {worst:.3e} at t0={t0}"
        )

    table = _subset_table(B)
    K = periods * M
    states = np.empty((K + 1, n))
    multipliers = np.zeros((K, m))
    masks = np.zeros(K + 1, dtype=np.int64)
    states[0] = z0
    masks[0] = _active_mask(B, offsets_phase[0], z0, tol)

    z = z0.copy()
    hint = None
    for k in range(K):
        p = z if drift_phase is None else z + h * drift_phase[k % M]
        c_next = offsets_phase[(k + 1) % M]
        z, lam, subset = _project_raw(B, c_next, table, p, tol, hint)
        hint = subset if subset else None
        states[k + 1] = z
        multipliers[k] = lam
        masks[k + 1] = _active_mask(B, c_next, z, tol)

    states.setflags(write=False)
    multipliers.setflags(write=False)
    masks.setflags(write=False)
    return Trajectory(problem, float(t0), h, M, states, multipliers, masks)


# ---------------------------------------------------------------------------
# Per-period distances and classification

def poincare_samples(traj: Trajectory) -> np.ndarray:
    """States at t0, t0+T, ..., t0+QT read off the grid."""
    return traj.states[:: traj.steps_per_period]


def _window(traj: Trajectory, q: int) -> np.ndarray:
    M = traj.steps_per_period
    return traj.states[q * M : (q + 1) * M + 1]


def period_distance_sup(traj: Trajectory, q: int) -> float:
    """max_k |z(t_k + qT) - z(t_k + (q+1)T)| over one period window."""
    if q < 0 or q + 2 > traj.periods:
        raise IndexError(f"window {q} out of range for {traj.periods} periods")
    diff = _window(traj, q) - _window(traj, q + 1)
    return float(np.max(np.linalg.norm(diff, axis=1)))


def period_distances_sup(traj: Trajectory) -> np.ndarray:
    return np.array([period_distance_sup(traj, q) for q in range(traj.periods - 1)])


def period_distance_w12(traj: Trajectory, q: int) -> float:
    """Discrete W^{1,2} distance between consecutive period windows.

    Uses forward divided differences; the last grid point of the window
    reuses the previous difference.
    """
    if q < 0 or q + 2 > traj.periods:
        raise IndexError(f"window {q} out of range for {traj.periods} periods")
    h = traj.h
    delta = _window(traj, q) - _window(traj, q + 1)
    value_part = h * float(np.sum(delta**2))
    dd = np.diff(delta, axis=0) / h
    dd = np.vstack([dd, dd[-1]])
    deriv_part = h * float(np.sum(dd**2))
    return float(np.sqrt(value_part + deriv_part))


def period_distances_w12(traj: Trajectory) -> np.ndarray:
    return np.array([period_distance_w12(traj, q) for q in range(traj.periods - 1)])


@dataclass(frozen=True)
class Classification:
    kind: str                 # "finite-time" | "geometric" | "undetermined"
    period: int | None = None
    ratio: float | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "period": self.period, "ratio": self.ratio}


def classify_convergence(
    traj: Trajectory,
    tol_ft: float = 1e-9,
    Q_min: int = 3,
    ratio_spread: float = 0.2,
) -> Classification:
    """Classify the per-period sup-distance sequence.

    Finite-time at q* when d_q <= tol_ft for all q >= q* (q* minimal).
    Otherwise geometric with the median ratio over the largest suffix of the
    above-tolerance run whose ratios have relative spread below ratio_spread
    (early windows may carry a transient in the sup geometry and are dropped
    only when the full run fails the spread test); undetermined when no
    suffix with at least two ratios qualifies.
    """
    if traj.periods < Q_min + 2:
        raise ValueError(f"need at least {Q_min + 2} periods, have {traj.periods}")
    d = period_distances_sup(traj)
    if d[-1] <= tol_ft:
        above = np.flatnonzero(d > tol_ft)
        qstar = 0 if len(above) == 0 else int(above[-1]) + 1
        return Classification("finite-time", period=qstar)
    qa = len(d) - 1
    while qa > 0 and d[qa - 1] > tol_ft:
        qa -= 1
    ratios = d[qa + 1 :] / d[qa:-1]
    for start in range(len(ratios) - 1):
        tail = ratios[start:]
        med = float(np.median(tail))
        spread = float((np.max(tail) - np.min(tail)) / med) if med > 0 else np.inf
        if spread < ratio_spread:
            return Classification("geometric", ratio=med)
    return Classification("undetermined")


# ---------------------------------------------------------------------------
# Multiplier diagnostics

def lambda_series(traj: Trajectory) -> np.ndarray:
    """Per-constraint rate coefficients lambda_i(t_k) = eta_{k,i} / h."""
    return traj.multipliers / traj.h


def _visited_licq(traj: Trajectory, masks) -> None:
    B = traj.problem.moving_set.normals
    for mask in set(int(x) for x in masks):
        idx = [i for i in range(B.shape[0]) if mask >> i & 1]
        if len(idx) <= 1:
            continue
        BS = B[idx]
        if np.linalg.matrix_rank(BS, tol=1e-12 * max(1.0, np.abs(BS).max())) < len(idx):
            raise LicqError(f"visited active set {tuple(idx)} has dependent normals")


def lambda_convergence(traj: Trajectory, q: int) -> np.ndarray:
    """Per-constraint discrete L2 distance between the multiplier rates of
    windows q and q+1. Raises LicqError if a visited face is degenerate."""
    M = traj.steps_per_period
    if q < 0 or (q + 2) * M > len(traj.multipliers):
        raise IndexError(f"window {q} out of range")
    lam = lambda_series(traj)
    a = lam[q * M : (q + 1) * M]
    b = lam[(q + 1) * M : (q + 2) * M]
    _visited_licq(traj, traj.active_masks[q * M + 1 : (q + 2) * M + 1])
    return np.sqrt(traj.h * np.sum((a - b) ** 2, axis=0))


def hypomonotone_check(traj1: Trajectory, traj2: Trajectory, slack: float = 1e-12) -> bool:
    """True iff |z1_k - z2_k| is nonincreasing (same problem, same grid).

    Discrete projections onto a common convex set are jointly nonexpansive,
    so for zero-drift problems this holds exactly up to rounding.
    """
    if (
        traj1.steps_per_period != traj2.steps_per_period
        or len(traj1.states) != len(traj2.states)
        or abs(traj1.t0 - traj2.t0) > 1e-12
        or abs(traj1.h - traj2.h) > 1e-15
    ):
        raise ValueError("trajectories live on different grids")
    d = np.linalg.norm(traj1.states - traj2.states, axis=1)
    return bool(np.all(np.diff(d) <= slack))


def estimate_limit_cycle(traj: Trajectory):
    """Last full period window and its residual sup-distance to the window before."""
    if traj.periods < 2:
        raise ValueError("need at least 2 periods to estimate a limit cycle")
    M = traj.steps_per_period
    window = traj.states[-(M + 1) :]
    residual = period_distance_sup(traj, traj.periods - 2)
    return window, residual


@dataclass(frozen=True)
class ConvergenceReport:
    d_sup: np.ndarray
    d_w12: np.ndarray
    classification: Classification
    cycle: np.ndarray = field(repr=False)
    residual: float

    def to_json(self) -> dict:
        return {
            "d_sup": [float(x) for x in self.d_sup],
            "d_w12": [float(x) for x in self.d_w12],
            "classification": self.classification.to_json(),
            "residual": float(self.residual),
        }


def convergence_report(
    traj: Trajectory,
    tol_ft: float = 1e-9,
    Q_min: int = 3,
    ratio_spread: float = 0.2,
) -> ConvergenceReport:
    cycle, residual = estimate_limit_cycle(traj)
    return ConvergenceReport(
        d_sup=period_distances_sup(traj),
        d_w12=period_distances_w12(traj),
        classification=classify_convergence(traj, tol_ft, Q_min, ratio_spread),
        cycle=cycle,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# Trajectory validation and CSV round trip

def validate_trajectory(traj: Trajectory, tol: float = DEFAULT_TOL) -> None:
    """Check the discrete-solution invariants; raise ValueError on violation."""
    P = traj.problem.moving_set
    B = P.normals
    M = traj.steps_per_period
    h = traj.h
    K = len(traj.states) - 1
    phases = _phase_times(traj.t0, h, M)
    offsets_phase = np.column_stack([eval_many(s, phases) for s in P.offsets])
    drift_phase = None
    if traj.problem.drift is not None:
        drift_phase = np.column_stack([eval_many(s, phases) for s in traj.problem.drift])
    for k in range(K):
        z_next = traj.states[k + 1]
        c_next = offsets_phase[(k + 1) % M]
        if np.any(B @ z_next > c_next + 10 * tol):
            raise ValueError(f"state {k + 1} infeasible")
        p = traj.states[k]
        if drift_phase is not None:
            p = p + h * drift_phase[k % M]
        recon = p - z_next - B.T @ traj.multipliers[k]
        if np.linalg.norm(recon) > 1e-10 * (1.0 + np.linalg.norm(p)):
            raise ValueError(f"multiplier reconstruction fails at step {k}")
        resid = c_next - B @ z_next
        support = np.flatnonzero(traj.multipliers[k] > 0)
        if np.any(resid[support] > 10 * tol):
            raise ValueError(f"multiplier support not active at step {k}")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.problem.dim
    m = traj.problem.moving_set.num_constraints
    header = (
        ["t"]
        + [f"z{i + 1}" for i in range(n)]
        + [f"eta_{i + 1}" for i in range(m)]
        + ["active_bitmask"]
    )
    times = traj.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(traj.states)):
            eta = traj.multipliers[k - 1] if k > 0 else np.zeros(m)
            row = (
                [FLOAT_FMT % times[k]]
                + [FLOAT_FMT % x for x in traj.states[k]]
                + [FLOAT_FMT % x for x in eta]
                + [str(int(traj.active_masks[k]))]
            )
            writer.writerow(row)


def read_trajectory_csv(path, problem: SweepingProblem) -> Trajectory:
    """Rebuild a Trajectory from a CSV written by write_trajectory_csv."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n = problem.dim
    m = problem.moving_set.num_constraints
    if len(header) != 1 + n + m + 1:
        raise ValueError("CSV header does not match the problem dimensions")
    times = np.array([float(r[0]) for r in data])
    states = np.array([[float(x) for x in r[1 : 1 + n]] for r in data])
    etas = np.array([[float(x) for x in r[1 + n : 1 + n + m]] for r in data])[1:]
    masks = np.array([int(r[-1]) for r in data], dtype=np.int64)
    h = float(times[1] - times[0])
    M = int(round(problem.period / h))
    return Trajectory(problem, float(times[0]), problem.period / M, M, states, etas, masks)
