"""Shared test utilities: independent oracles and random-instance generators.

The oracles here deliberately avoid the code paths they check: cone
coefficients come from least-squares over support subsets, gradients from
central differences, and random polyhedra are built to be compact and
nonempty by construction.
"""

import itertools

import numpy as np

from sweeplab.polyhedra import FrozenPolyhedron, positively_spanning
from sweeplab.signals import PeriodicSignal


def brute_force_cone_coefficients(B_active: np.ndarray, v: np.ndarray):
    """Nonnegative least squares min |B_active^T lam - v| by support enumeration.

    Every NNLS optimum is a least-squares solution on its support, so trying
    all supports and keeping the best feasible candidate is exact.
    """
    k = B_active.shape[0]
    best_lam = np.zeros(k)
    best_resid = float(np.linalg.norm(v))
    for size in range(1, k + 1):
        for idx in itertools.combinations(range(k), size):
            A = B_active[list(idx)].T
            sol, *_ = np.linalg.lstsq(A, v, rcond=None)
            if np.any(sol < -1e-12):
                continue
            resid = float(np.linalg.norm(A @ sol - v))
            if resid < best_resid - 1e-15:
                best_resid = resid
                best_lam = np.zeros(k)
                best_lam[list(idx)] = np.maximum(sol, 0.0)
    return best_lam, best_resid


def central_difference_gradient(f, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    g = np.zeros_like(x, dtype=float)
    for i in range(len(x)):
        e = np.zeros_like(x, dtype=float)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def random_polyhedron(rng: np.random.Generator, n: int, m: int) -> FrozenPolyhedron:
    """Compact, nonempty random polyhedron containing a known interior point."""
    assert m >= n + 1
    while True:
        B = rng.normal(size=(m, n))
        B /= np.linalg.norm(B, axis=1, keepdims=True)
        if positively_spanning(B):
            break
    center = rng.normal(scale=0.5, size=n)
    slack = rng.uniform(0.3, 1.5, size=m)
    return FrozenPolyhedron(B, B @ center + slack)


def random_point_outside(rng: np.random.Generator, F: FrozenPolyhedron) -> np.ndarray:
    from sweeplab.polyhedra import contains

    while True:
        p = rng.normal(scale=4.0, size=F.dim)
        if not contains(F, p, 1e-9):
            return p


def lattice_signal(rng: np.random.Generator, period: float, kmax: int = 4) -> PeriodicSignal:
    """Piecewise-linear signal with breakpoints on the period/8 grid and
    values on the 0.25 lattice (exact ties across signals are common)."""
    num = int(rng.integers(1, kmax + 1))
    slots = sorted(rng.choice(8, size=num, replace=False))
    pts = [(period * s / 8.0, 0.25 * int(rng.integers(1, 9))) for s in slots]
    return PeriodicSignal(period, pts)


def random_gait(rng: np.random.Generator, num_blocks: int, period: float = 1.0):
    from sweeplab.crawler import Gait

    return Gait(
        num_blocks=num_blocks,
        period=period,
        stiffness=1.0,
        rest_lengths=tuple(lattice_signal(rng, period) for _ in range(num_blocks - 1)),
        mu_plus=tuple(lattice_signal(rng, period) for _ in range(num_blocks)),
        mu_minus=tuple(lattice_signal(rng, period) for _ in range(num_blocks)),
    )


def gait_margin_floor(g) -> float:
    """Exact lower bound for the uniqueness margin over the whole period.

    Every subset expression sum_J mu+ - sum_{J^c} mu- is piecewise linear
    with breakpoints on the period/8 grid, so it suffices to look at the
    eighth points: a sign change forces an interior zero (margin 0),
    otherwise the minimum modulus is attained at a breakpoint.
    """
    import numpy as np

    from sweeplab.crawler import friction_values

    N = g.num_blocks
    ts = g.period * np.arange(8) / 8.0
    vals = []
    for t in ts:
        mup, mum = friction_values(g, float(t))
        vals.append((mup, mum))
    floor = np.inf
    for bits in range(1 << N):
        expr = np.array(
            [
                sum(mup[i] if bits >> i & 1 else -mum[i] for i in range(N))
                for mup, mum in vals
            ]
        )
        wrapped = np.append(expr, expr[0])
        if np.any(wrapped[:-1] * wrapped[1:] < 0):
            return 0.0
        floor = min(floor, float(np.min(np.abs(expr))))
    return floor


def random_gait_with_margin(rng: np.random.Generator, num_blocks: int, threshold: float):
    while True:
        g = random_gait(rng, num_blocks)
        if gait_margin_floor(g) > threshold:
            return g
