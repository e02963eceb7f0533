"""Periodic scalar signals used as polyhedron offsets, actuations and drifts.

Signals are T-periodic and either piecewise-linear ("pl") or piecewise-constant
("pc"). Piecewise-linear signals are continuous across the wrap-around by
construction: the last breakpoint interpolates toward the first one shifted by
a period. Piecewise-constant signals are left-closed/right-open step functions
and are admitted only as integrator drift, never as polyhedron offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIECEWISE_LINEAR = "pl"
PIECEWISE_CONSTANT = "pc"


@dataclass(frozen=True)
class PeriodicSignal:
    """A T-periodic scalar function given by breakpoints in [0, period).

    Breakpoint times must be strictly increasing and live in [0, period).
    Time is reduced modulo the period with the floor convention, so negative
    arguments are fine.
    """

    period: float
    kind: str
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __init__(self, period, points, kind=PIECEWISE_LINEAR):
        if period <= 0:
            raise ValueError(f"period must be positive, got {period}")
        if kind not in (PIECEWISE_LINEAR, PIECEWISE_CONSTANT):
            raise ValueError(f"unknown signal kind {kind!r}")
        pts = sorted((float(t), float(v)) for t, v in points)
        if not pts:
            raise ValueError("a signal needs at least one breakpoint")
        times = np.array([t for t, _ in pts], dtype=float)
        values = np.array([v for _, v in pts], dtype=float)
        if times[0] < 0 or times[-1] >= period:
            raise ValueError("breakpoint times must lie in [0, period)")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "period", float(period))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @staticmethod
    def constant(value, period):
        return PeriodicSignal(period, [(0.0, value)], PIECEWISE_LINEAR)

    def __call__(self, t):
        return eval_signal(self, t)

    def to_json(self) -> dict:
        return {
            "period": self.period,
            "kind": self.kind,
            "points": [[float(t), float(v)] for t, v in zip(self.times, self.values)],
        }

    @staticmethod
    def from_json(obj: dict) -> "PeriodicSignal":
        return PeriodicSignal(obj["period"], obj["points"], obj["kind"])


def _reduce(t: float, period: float) -> float:
    # Floor-convention reduction; maps any real (including negatives) to [0, period).
    tau = t % period
    if tau >= period:  # guard against rounding at the right edge
        tau -= period
    return tau


def eval_signal(s: PeriodicSignal, t: float) -> float:
    """Evaluate s at time t (periodic extension)."""
    tau = _reduce(float(t), s.period)
    ts, vs = s.times, s.values
    if s.kind == PIECEWISE_CONSTANT:
        i = np.searchsorted(ts, tau, side="right") - 1
        return float(vs[i]) if i >= 0 else float(vs[-1])
    if len(ts) == 1:
        return float(vs[0])
    # Extend with the wrap segment on both sides so that [0, period) is covered.
    ext_t = np.concatenate(([ts[-1] - s.period], ts, [ts[0] + s.period]))
    ext_v = np.concatenate(([vs[-1]], vs, [vs[0]]))
    return float(np.interp(tau, ext_t, ext_v))


def eval_many(s: PeriodicSignal, ts) -> np.ndarray:
    """Vectorized evaluation on an array of times."""
    ts = np.asarray(ts, dtype=float)
    tau = ts % s.period
    tau[tau >= s.period] -= s.period
    if s.kind == PIECEWISE_CONSTANT:
        idx = np.searchsorted(s.times, tau, side="right") - 1
        return s.values[np.where(idx >= 0, idx, len(s.values) - 1)]
    if len(s.times) == 1:
        return np.full_like(tau, s.values[0])
    ext_t = np.concatenate(([s.times[-1] - s.period], s.times, [s.times[0] + s.period]))
    ext_v = np.concatenate(([s.values[-1]], s.values, [s.values[0]]))
    return np.interp(tau, ext_t, ext_v)


def lipschitz_constant(s: PeriodicSignal) -> float:
    """Largest |slope| over all segments, including the wrap-around segment.

    Piecewise-constant signals with a jump are rejected: they are not
    Lipschitz and cannot serve as moving-polyhedron offsets.
    """
    if s.kind == PIECEWISE_CONSTANT:
        if np.ptp(s.values) > 0:
            raise ValueError("piecewise-constant signal with jumps has no Lipschitz constant")
        return 0.0
    if len(s.times) == 1:
        return 0.0
    ts = np.concatenate((s.times, [s.times[0] + s.period]))
    vs = np.concatenate((s.values, [s.values[0]]))
    slopes = np.diff(vs) / np.diff(ts)
    return float(np.max(np.abs(slopes)))


def combine(signals, coeffs, constant: float = 0.0) -> PeriodicSignal:
    """Exact linear combination sum_i coeffs[i]*signals[i] + constant.

    Only piecewise-linear signals sharing one period are supported; the result
    is piecewise-linear on the merged breakpoint set.
    """
    signals = list(signals)
    if not signals:
        raise ValueError("need at least one signal")
    period = signals[0].period
    for s in signals:
        if s.kind != PIECEWISE_LINEAR:
            raise ValueError("combine supports piecewise-linear signals only")
        if abs(s.period - period) > 1e-12 * max(1.0, period):
            raise ValueError("signals must share one period")
    merged = np.unique(np.concatenate([s.times for s in signals]))
    # Collapse breakpoints closer than the dedupe tolerance.
    keep = [merged[0]]
    for t in merged[1:]:
        if t - keep[-1] > 1e-12 * max(1.0, period):
            keep.append(t)
    pts = []
    for t in keep:
        v = constant + sum(c * eval_signal(s, t) for s, c in zip(signals, coeffs))
        pts.append((float(t), float(v)))
    return PeriodicSignal(period, pts, PIECEWISE_LINEAR)


def triangle_wave(period, amplitude, peak_fraction=0.5, base=0.0) -> PeriodicSignal:
    """Triangle going base -> base+amplitude at peak_fraction*period -> base."""
    if not 0 < peak_fraction < 1:
        raise ValueError("peak_fraction must lie strictly between 0 and 1")
    return PeriodicSignal(
        period,
        [(0.0, base), (peak_fraction * period, base + amplitude)],
        PIECEWISE_LINEAR,
    )
