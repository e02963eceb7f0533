"""Quasistatic chain-of-blocks crawler driven by periodic actuation.

A crawler is N blocks on a line, joined by N-1 series actuator+spring links,
each block subject to time-dependent dry friction with thresholds mu_i^+(t)
(forward) and mu_i^-(t) (backward). The quasistatic force balance reduces, in
the shape variable w = -k * pi_Z(x), to a sweeping process on a moving
polyhedron K(t) in R^{N-1}; the mean position y = pi_Y(x) is recovered from
the projection multipliers. An independent full-space incremental-minimization
solver (exact slip-pattern enumeration) cross-checks the reduced pipeline.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGaitError,
    EnumerationCapError,
    InadmissibleStateError,
    PatternSearchError,
)
from .polyhedra import DEFAULT_TOL, MovingPolyhedron
from .signals import PIECEWISE_LINEAR, PeriodicSignal, combine, eval_many, eval_signal
from .sweeping import SweepingProblem, Trajectory, simulate

MARGIN_REJECT_FRACTION = 1e-3  # grid fraction of zero-margin times that rejects a gait


@dataclass(frozen=True)
class Gait:
    """Periodic actuation lengths and friction thresholds for an N-block crawler."""

    num_blocks: int
    period: float
    stiffness: float
    rest_lengths: tuple
    mu_plus: tuple
    mu_minus: tuple

    def __post_init__(self):
        N = self.num_blocks
        if N < 2:
            raise ValueError("a crawler needs at least 2 blocks")
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")
        if len(self.rest_lengths) != N - 1:
            raise ValueError(f"need {N - 1} rest-length signals, got {len(self.rest_lengths)}")
        if len(self.mu_plus) != N or len(self.mu_minus) != N:
            raise ValueError(f"need {N} friction signals per direction")
        for s in (*self.rest_lengths, *self.mu_plus, *self.mu_minus):
            if s.kind != PIECEWISE_LINEAR:
                raise ValueError("gait signals must be piecewise-linear")
            if abs(s.period - self.period) > 1e-12 * max(1.0, self.period):
                raise ValueError("all gait signals must share the gait period")
        for s in (*self.mu_plus, *self.mu_minus):
            if np.min(s.values) <= 0:
                raise ValueError("friction thresholds must be strictly positive")
        object.__setattr__(self, "rest_lengths", tuple(self.rest_lengths))
        object.__setattr__(self, "mu_plus", tuple(self.mu_plus))
        object.__setattr__(self, "mu_minus", tuple(self.mu_minus))

    def to_json(self) -> dict:
        return {
            "N": self.num_blocks,
            "T": self.period,
            "k": self.stiffness,
            "L": [s.to_json() for s in self.rest_lengths],
            "mu_plus": [s.to_json() for s in self.mu_plus],
            "mu_minus": [s.to_json() for s in self.mu_minus],
        }

    @staticmethod
    def from_json(obj: dict) -> "Gait":
        return Gait(
            int(obj["N"]),
            float(obj["T"]),
            float(obj["k"]),
            tuple(PeriodicSignal.from_json(s) for s in obj["L"]),
            tuple(PeriodicSignal.from_json(s) for s in obj["mu_plus"]),
            tuple(PeriodicSignal.from_json(s) for s in obj["mu_minus"]),
        )


# ---------------------------------------------------------------------------
# Shape/position split

def shape_matrix(N: int) -> np.ndarray:
    """PZ with z = PZ @ x, z_j = x_{j+1} - x_j."""
    PZ = np.zeros((N - 1, N))
    for j in range(N - 1):
        PZ[j, j] = -1.0
        PZ[j, j + 1] = 1.0
    return PZ


def pi_y(x) -> float:
    return float(np.mean(np.asarray(x, dtype=float)))


def pi_z(x) -> np.ndarray:
    return np.diff(np.asarray(x, dtype=float))


def assemble_positions(y, z) -> np.ndarray:
    """Invert (pi_Y, pi_Z): unique x with mean y and consecutive gaps z."""
    z = np.asarray(z, dtype=float)
    N = len(z) + 1
    prefix = np.concatenate(([0.0], np.cumsum(z)))
    x0 = y - prefix.sum() / N
    return x0 + prefix


# ---------------------------------------------------------------------------
# Energy, dissipation, admissibility

def rest_length_values(g: Gait, t: float) -> np.ndarray:
    return np.array([eval_signal(s, t) for s in g.rest_lengths])


def friction_values(g: Gait, t: float):
    mup = np.array([eval_signal(s, t) for s in g.mu_plus])
    mum = np.array([eval_signal(s, t) for s in g.mu_minus])
    return mup, mum


def energy(g: Gait, t: float, x) -> float:
    z = pi_z(x)
    ell = rest_length_values(g, t)
    return float(0.5 * g.stiffness * np.sum((z - ell) ** 2))


def energy_gradient(g: Gait, t: float, x) -> np.ndarray:
    z = pi_z(x)
    ell = rest_length_values(g, t)
    PZ = shape_matrix(g.num_blocks)
    return PZ.T @ (g.stiffness * (z - ell))


def dissipation(g: Gait, t: float, v) -> float:
    v = np.asarray(v, dtype=float)
    mup, mum = friction_values(g, t)
    return float(np.sum(mup * np.maximum(v, 0.0) + mum * np.maximum(-v, 0.0)))


def admissible(g: Gait, t: float, x, tol: float = DEFAULT_TOL) -> bool:
    """True iff the elastic force -dE/dx lies within the friction bounds."""
    force = -energy_gradient(g, t, x)
    mup, mum = friction_values(g, t)
    return bool(np.all(force <= mup + tol) and np.all(force >= -mum - tol))


# ---------------------------------------------------------------------------
# Polyhedra of the model

def build_force_polyhedron(g: Gait) -> MovingPolyhedron:
    """Admissible-force set {xi : -mu_i^-(t) <= xi_i <= mu_i^+(t)} in R^N.

    Constraint i < N is the block-i forward bound (+mu^+), constraint N+i the
    block-i backward bound.
    """
    N = g.num_blocks
    eye = np.eye(N)
    normals = np.vstack([eye, -eye])
    offsets = tuple(g.mu_plus) + tuple(g.mu_minus)
    return MovingPolyhedron(normals, offsets)


def build_moving_set(g: Gait) -> MovingPolyhedron:
    """Moving set K(t) of the reduced shape sweeping process in R^{N-1}.

    With nu_i = pi_Z(e_i) and the shift g_sh(t) = k*(L_1(t),...,L_{N-1}(t)),
    the constraints are <nu_i, w> <= mu_i^+(t) - <nu_i, g_sh(t)> for i < N and
    <-nu_i, w> <= mu_i^-(t) + <nu_i, g_sh(t)> for the backward bounds, i.e.
    K(t) is the friction box in shape coordinates translated by -g_sh(t).
    Then w = -k*pi_Z(x) lies in K(t) iff x is admissible: the residual of
    constraint i equals the margin of block i's forward force bound
    (backward for i >= N), which pins both the index convention and the sign
    of the shift.
    """
    N = g.num_blocks
    k = g.stiffness
    PZ = shape_matrix(N)
    normals = []
    offsets = []
    for i in range(N):
        nu = PZ[:, i]
        coeffs = [1.0] + [-k * nu[j] for j in range(N - 1)]
        offsets.append(combine([g.mu_plus[i], *g.rest_lengths], coeffs))
        normals.append(nu)
    for i in range(N):
        nu = PZ[:, i]
        coeffs = [1.0] + [k * nu[j] for j in range(N - 1)]
        offsets.append(combine([g.mu_minus[i], *g.rest_lengths], coeffs))
        normals.append(-nu)
    return MovingPolyhedron(np.array(normals), tuple(offsets))


def shift_vector(g: Gait, t: float) -> np.ndarray:
    return g.stiffness * rest_length_values(g, t)


# ---------------------------------------------------------------------------
# Uniqueness margin

@dataclass(frozen=True)
class MarginReport:
    min_margin: float
    worst_time: float
    worst_subset: tuple   # block indices (0-based) of the forward-slip side


def margin_at(g: Gait, t: float):
    """min over subsets J of |sum_J mu^+ - sum_{J^c} mu^-| at time t."""
    N = g.num_blocks
    if N > 16:
        raise EnumerationCapError("margin enumeration supports at most 16 blocks")
    mup, mum = friction_values(g, t)
    total_minus = mum.sum()
    best = np.inf
    best_subset = ()
    for bits in range(1 << N):
        subset = tuple(i for i in range(N) if bits >> i & 1)
        val = abs(sum(mup[i] + mum[i] for i in subset) - total_minus)
        if val < best:
            best = val
            best_subset = subset
    return float(best), best_subset


def check_gait_uniqueness(g: Gait, times) -> MarginReport:
    best = np.inf
    worst_t = None
    worst_subset = ()
    for t in np.asarray(times, dtype=float):
        val, subset = margin_at(g, t)
        if val < best:
            best, worst_t, worst_subset = val, float(t), subset
    return MarginReport(float(best), worst_t, worst_subset)


def _margin_gate(g: Gait, times, tol: float) -> MarginReport:
    margins = np.array([margin_at(g, t)[0] for t in times])
    report = check_gait_uniqueness(g, times)
    frac = float(np.mean(margins <= tol))
    if frac > MARGIN_REJECT_FRACTION:
        raise DegenerateGaitError(
            f"uniqueness margin vanishes on {frac:.1%} of the grid "
            f"(worst {report.min_margin:.3e} at t={report.worst_time})"
        )
    if frac > 0:
        warnings.warn(
            f"uniqueness margin vanishes on {frac:.1%} of the grid; results may be fragile",
            stacklevel=2,
        )
    return report


# ---------------------------------------------------------------------------
# Reduced pipeline

@dataclass(frozen=True)
class Motion:
    """Block positions over a run, with the shape/mean split precomputed."""

    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)   # (K+1, N)
    steps_per_period: int
    period: float

    @property
    def mean_positions(self) -> np.ndarray:
        return self.positions.mean(axis=1)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.positions, axis=1)

    @property
    def periods(self) -> int:
        return (len(self.positions) - 1) // self.steps_per_period


@dataclass(frozen=True)
class CrawlerRun:
    gait: Gait
    reduced: Trajectory
    motion: Motion
    margin: MarginReport


def recover_translation(eta, stiffness: float, num_blocks: int):
    """Mean-position increment from projection multipliers on K(t).

    Positively homogeneous of degree one: forward-slip multipliers (first N)
    push the mean forward, backward-slip multipliers pull it back.
    """
    eta = np.asarray(eta, dtype=float)
    N = num_blocks
    fwd = eta[..., :N].sum(axis=-1)
    back = eta[..., N:].sum(axis=-1)
    return (fwd - back) / (stiffness * N)


def simulate_reduced(
    g: Gait,
    x0,
    t0: float,
    periods: int,
    steps_per_period: int,
    tol: float = DEFAULT_TOL,
) -> CrawlerRun:
    """Integrate the reduced sweeping process and recover the full motion."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.num_blocks,):
        raise ValueError(f"x0 must have {g.num_blocks} entries")
    if not admissible(g, t0, x0, tol):
        raise InadmissibleStateError("initial configuration violates the force bounds")
    h = g.period / steps_per_period
    grid = t0 + h * np.arange(steps_per_period)
    margin = _margin_gate(g, grid, tol)

    K = build_moving_set(g)
    problem = SweepingProblem(K)
    w0 = -g.stiffness * pi_z(x0)
    traj = simulate(problem, w0, t0, periods, steps_per_period, tol)

    dy = recover_translation(traj.multipliers, g.stiffness, g.num_blocks)
    y = pi_y(x0) + np.concatenate(([0.0], np.cumsum(dy)))
    z = -traj.states / g.stiffness
    positions = np.array([assemble_positions(yk, zk) for yk, zk in zip(y, z)])
    motion = Motion(traj.times, positions, steps_per_period, g.period)
    return CrawlerRun(g, traj, motion, margin)


# ---------------------------------------------------------------------------
# Velocity estimation and running-periodic decomposition

@dataclass(frozen=True)
class VelocityEstimate:
    v0: float
    per_period: list
    converged: bool


def estimate_velocity(motion: Motion, tol_v: float = 1e-6) -> VelocityEstimate:
    """Per-period mean-position displacements and the final-period velocity."""
    Q = motion.periods
    if Q < 3:
        raise ValueError("need at least 3 periods to estimate the velocity")
    M = motion.steps_per_period
    y = motion.mean_positions
    per_period = [
        float((y[q * M] - y[(q - 1) * M]) / motion.period) for q in range(1, Q + 1)
    ]
    last3 = per_period[-3:]
    converged = bool(max(last3) - min(last3) < tol_v)
    return VelocityEstimate(per_period[-1], per_period, converged)


@dataclass(frozen=True)
class RunningPeriodicDecomposition:
    x_bar0: np.ndarray
    v_bar0: float
    p_window: np.ndarray = field(repr=False)   # (M+1, N) periodic part over the last period
    residual: float
    converged: bool


def running_periodic_decomposition(motion: Motion, tol_v: float = 1e-6) -> RunningPeriodicDecomposition:
    """Split x(t) = x_bar0 + (t - t0) v_bar0 + p(t) over the last period.

    The endpoint mismatch of p over that window is reported as the residual;
    a non-converged velocity estimate is flagged (and warned), not fatal.
    """
    vel = estimate_velocity(motion, tol_v)
    if not vel.converged:
        warnings.warn("velocity estimate has not settled; decomposition residual may be large")
    M = motion.steps_per_period
    x_bar0 = motion.positions[0].copy()
    t_rel = motion.times[-(M + 1) :] - motion.times[0]
    window = motion.positions[-(M + 1) :]
    p = window - x_bar0 - np.outer(t_rel, np.ones(window.shape[1])) * vel.v0
    residual = float(np.max(np.abs(p[-1] - p[0])))
    return RunningPeriodicDecomposition(x_bar0, vel.v0, p, residual, vel.converged)


# ---------------------------------------------------------------------------
# Incremental-minimization oracle

@dataclass(frozen=True)
class OracleRun:
    gait: Gait
    motion: Motion
    patterns: np.ndarray = field(repr=False)   # (K, N) in {-1, 0, +1}


def _pattern_list(N: int):
    pats = list(itertools.product((0, 1, -1), repeat=N))
    pats.sort(key=lambda p: (sum(1 for s in p if s != 0), p))
    return pats


def incremental_oracle(
    g: Gait,
    x0,
    t0: float,
    periods: int,
    steps_per_period: int,
    tol: float = DEFAULT_TOL,
) -> OracleRun:
    """Full-space incremental minimizer x_{k+1} = argmin E(t,x) + R(t, x - x_k).

    Solved exactly per step by enumerating the 3^N forward/stick/backward slip
    patterns: sticking blocks are pinned, slipping blocks satisfy the linear
    force balance at their saturated threshold, and the first pattern passing
    the sign and bound checks is accepted (patterns with fewer slipping blocks
    are tried first, the previous step's pattern before all others).
    """
    N = g.num_blocks
    if N > 8:
        raise EnumerationCapError("slip-pattern enumeration supports at most 8 blocks")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (N,):
        raise ValueError(f"x0 must have {N} entries")
    if not admissible(g, t0, x0, tol):
        raise InadmissibleStateError("initial configuration violates the force bounds")

    M = int(steps_per_period)
    h = g.period / M
    phases = t0 + h * np.arange(M)
    ell_phase = np.column_stack([eval_many(s, phases) for s in g.rest_lengths])
    mup_phase = np.column_stack([eval_many(s, phases) for s in g.mu_plus])
    mum_phase = np.column_stack([eval_many(s, phases) for s in g.mu_minus])

    PZ = shape_matrix(N)
    A = g.stiffness * (PZ.T @ PZ)   # force(x) = -A x + k PZ^T ell
    patterns = _pattern_list(N)

    K = periods * M
    xs = np.empty((K + 1, N))
    xs[0] = x0
    chosen = np.zeros((K, N), dtype=np.int8)
    x = x0.copy()
    hint = None
    for k in range(K):
        ph = (k + 1) % M
        ell = ell_phase[ph]
        mup = mup_phase[ph]
        mum = mum_phase[ph]
        b = g.stiffness * (PZ.T @ ell)
        x_new, pat = _oracle_step(x, A, b, mup, mum, patterns, hint, tol)
        x = x_new
        xs[k + 1] = x
        chosen[k] = pat
        hint = pat
    times = t0 + h * np.arange(K + 1)
    motion = Motion(times, xs, M, g.period)
    return OracleRun(g, motion, chosen)


def _oracle_step(x, A, b, mup, mum, patterns, hint, tol):
    order = []
    if hint is not None:
        order.append(tuple(int(s) for s in hint))
    nearest = (np.inf, None)
    for pat in itertools.chain(order, patterns):
        x_new, violation = _try_pattern(x, A, b, mup, mum, pat, tol)
        if violation <= tol:
            return x_new, np.array(pat, dtype=np.int8)
        if violation < nearest[0]:
            nearest = (violation, pat)
    raise PatternSearchError(
        f"no consistent slip pattern; nearest miss {nearest[1]} violates by {nearest[0]:.3e}"
    )


def _try_pattern(x, A, b, mup, mum, pat, tol):
    """Solve a slip pattern and return (candidate, worst KKT violation)."""
    N = len(x)
    slips = [i for i, s in enumerate(pat) if s != 0]
    x_new = x.copy()
    if slips:
        idx = np.array(slips)
        target = np.where(np.array(pat)[idx] > 0, mup[idx], -mum[idx])
        rhs = b[idx] - target
        if len(slips) < N:
            sticks = np.array([i for i in range(N) if pat[i] == 0])
            rhs = rhs - A[np.ix_(idx, sticks)] @ x[sticks]
            x_new[idx] = np.linalg.solve(A[np.ix_(idx, idx)], rhs)
        else:
            # The all-slip system is singular (translation invariance) and
            # consistent only for degenerate friction balances.
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.linalg.norm(A @ sol - rhs) > tol * (1.0 + np.linalg.norm(rhs)):
                return x, np.inf
            x_new[:] = sol
    force = -A @ x_new + b
    violation = 0.0
    for i in range(N):
        if pat[i] > 0:
            violation = max(violation, x[i] - x_new[i])          # must move forward
        elif pat[i] < 0:
            violation = max(violation, x_new[i] - x[i])          # must move backward
        else:
            violation = max(violation, force[i] - mup[i], -mum[i] - force[i])
    return x_new, violation
