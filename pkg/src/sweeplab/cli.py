"""Batch front end: run scenarios or gaits from JSON configs and emit reports.

Outputs are deterministic: floats are printed with 17 significant digits,
JSON keys are sorted, and random initial states come from a seeded generator
recorded in the summary. Exit codes: 0 success, 2 rejected gait (vanishing
uniqueness margin), 3 inadmissible initial state, 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crawler import (
    Gait,
    assemble_positions,
    build_moving_set,
    check_gait_uniqueness,
    estimate_velocity,
    incremental_oracle,
    simulate_reduced,
)
from .errors import (
    ConfigError,
    DegenerateGaitError,
    GridAlignmentError,
    InadmissibleStateError,
    SweepLabError,
)
from .polyhedra import DEFAULT_TOL, bounding_box, contains, freeze
from .scenarios import Scenario, catalog
from .sweeping import (
    SweepingProblem,
    convergence_report,
    simulate,
    write_trajectory_csv,
)

FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Deterministic serialization

def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        return "null"
    return FLOAT_FMT % x


def dump_json(obj, indent: int = 0) -> str:
    """JSON emitter with fixed float formatting and sorted keys."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {dump_json(obj[k], indent + 1)}'
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + ", ".join(dump_json(x, indent) for x in seq) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def write_json(path: Path, obj) -> None:
    path.write_text(dump_json(obj) + "\n")


# ---------------------------------------------------------------------------
# Run configuration

@dataclass
class RunConfig:
    scenario: str | None = None
    gait: Gait | None = None
    problem: SweepingProblem | None = None
    t0: float = 0.0
    periods: int | None = None
    steps_per_period: int | None = None
    tol: float = DEFAULT_TOL
    tol_ft: float = 1e-9
    tol_v: float = 1e-6
    seed: int = 0
    initial_states: object = None      # list of states, {"random": k}, or None (scenario default)
    reports: tuple = ("trajectory", "convergence", "velocity")
    compare: bool = False
    out: Path = field(default_factory=lambda: Path("."))

    @staticmethod
    def load(args) -> "RunConfig":
        cfg = RunConfig()
        raw = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if "scenario" in raw:
            cfg.scenario = raw["scenario"]
        if "gait" in raw:
            cfg.gait = Gait.from_json(raw["gait"])
        if "problem" in raw:
            cfg.problem = SweepingProblem.from_json(raw["problem"])
        for key in ("t0", "tol", "tol_ft", "tol_v"):
            if key in raw:
                setattr(cfg, key, float(raw[key]))
        if "periods" in raw:
            cfg.periods = int(raw["periods"])
        if "steps_per_period" in raw:
            cfg.steps_per_period = int(raw["steps_per_period"])
        if "seed" in raw:
            cfg.seed = int(raw["seed"])
        if "initial_states" in raw:
            cfg.initial_states = raw["initial_states"]
        if "reports" in raw:
            cfg.reports = tuple(raw["reports"])
        if getattr(args, "scenario", None):
            cfg.scenario = args.scenario
        if getattr(args, "periods", None) is not None:
            cfg.periods = args.periods
        if getattr(args, "steps", None) is not None:
            cfg.steps_per_period = args.steps
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "t0", None) is not None:
            cfg.t0 = args.t0
        if getattr(args, "starts", None) is not None:
            cfg.initial_states = {"random": args.starts}
        if getattr(args, "compare", False):
            cfg.compare = True
        if getattr(args, "out", None):
            cfg.out = Path(args.out)
        return cfg

    def resolve(self):
        """Return (scenario-or-None, gait-or-None, problem-or-None, periods, steps)."""
        sc = None
        gait, problem = self.gait, self.problem
        if self.scenario is not None:
            if gait is not None or problem is not None:
                raise ConfigError("give either a scenario name or an inline gait/problem")
            try:
                sc = catalog()[self.scenario]
            except KeyError:
                raise ConfigError(f"unknown scenario {self.scenario!r}") from None
            gait, problem = sc.gait, sc.problem
        if gait is None and problem is None:
            raise ConfigError("config needs a scenario name, a gait, or a problem")
        periods = self.periods or (sc.recommended_periods if sc else 10)
        steps = self.steps_per_period or (sc.recommended_steps if sc else 1000)
        if periods < 1 or steps < 1:
            raise ConfigError("periods and steps_per_period must be positive")
        if gait is not None and "velocity" in self.reports and periods < 3:
            raise ConfigError("velocity reports need at least 3 periods")
        if "convergence" in self.reports and periods < 3:
            raise ConfigError("convergence reports need at least 3 periods")
        return sc, gait, problem, periods, steps


# ---------------------------------------------------------------------------
# Initial states

def _random_states_in(F, count: int, rng, tol: float) -> list:
    lo, hi = bounding_box(F, tol)
    out = []
    guard = 0
    while len(out) < count:
        guard += 1
        if guard > 100000:
            raise ConfigError("rejection sampling failed to find admissible states")
        z = rng.uniform(lo, hi)
        if contains(F, z, tol):
            out.append(z)
    return out


def _initial_states(cfg: RunConfig, sc: Scenario | None, gait, problem, rng) -> list:
    requested = cfg.initial_states
    if isinstance(requested, list):
        return [np.asarray(s, dtype=float) for s in requested]
    count = None
    if isinstance(requested, dict) and "random" in requested:
        count = int(requested["random"])
    if count is None:
        if sc is not None:
            return [np.asarray(sc.initial_state, dtype=float)]
        count = 1
    if gait is not None:
        K0 = freeze(build_moving_set(gait), cfg.t0)
        ws = _random_states_in(K0, count, rng, cfg.tol)
        return [assemble_positions(0.0, -w / gait.stiffness) for w in ws]
    F0 = freeze(problem.moving_set, cfg.t0)
    return [np.asarray(z, dtype=float) for z in _random_states_in(F0, count, rng, cfg.tol)]


# ---------------------------------------------------------------------------
# Motion CSV (gait runs)

def write_motion_csv(path: Path, run) -> None:
    motion = run.motion
    N = motion.positions.shape[1]
    w = run.reduced.states
    z = motion.gaps
    y = motion.mean_positions
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(N)]
        + ["y"]
        + [f"z{i + 1}" for i in range(N - 1)]
        + [f"w{i + 1}" for i in range(N - 1)]
    )
    lines = [",".join(header)]
    for k in range(len(motion.times)):
        row = (
            [FLOAT_FMT % motion.times[k]]
            + [FLOAT_FMT % v for v in motion.positions[k]]
            + [FLOAT_FMT % y[k]]
            + [FLOAT_FMT % v for v in z[k]]
            + [FLOAT_FMT % v for v in w[k]]
        )
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands

def _suffix(i: int, total: int) -> str:
    return "" if total == 1 else f"_s{i}"


def cmd_run(args) -> int:
    cfg = RunConfig.load(args)
    sc, gait, problem, periods, steps = cfg.resolve()
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    starts = _initial_states(cfg, sc, gait, problem, rng)
    summary = [
        f"scenario: {sc.name if sc else 'inline'}",
        f"kind: {'gait' if gait is not None else 'sweeping'}",
        f"t0: {_fmt_float(cfg.t0)}",
        f"periods: {periods}",
        f"steps_per_period: {steps}",
        f"seed: {cfg.seed}",
        f"starts: {len(starts)}",
    ]

    if gait is not None:
        runs = [simulate_reduced(gait, x0, cfg.t0, periods, steps, cfg.tol) for x0 in starts]
        for i, run in enumerate(runs):
            tag = _suffix(i, len(runs))
            if "trajectory" in cfg.reports:
                write_trajectory_csv(run.reduced, out / f"trajectory{tag}.csv")
                write_motion_csv(out / f"motion{tag}.csv", run)
            if "convergence" in cfg.reports:
                rep = convergence_report(run.reduced, cfg.tol_ft, Q_min=min(3, periods - 2))
                write_json(out / f"convergence{tag}.json", rep.to_json())
        if "velocity" in cfg.reports:
            vels = [estimate_velocity(r.motion, cfg.tol_v) for r in runs]
            v0s = [v.v0 for v in vels]
            payload = {
                "v0": v0s[0],
                "per_period": vels[0].per_period,
                "margin": runs[0].margin.min_margin,
                "converged": all(v.converged for v in vels),
            }
            if len(v0s) > 1:
                payload["v0_by_start"] = v0s
                payload["v0_spread"] = max(v0s) - min(v0s)
            write_json(out / "velocity.json", payload)
            summary.append(f"v0: {_fmt_float(v0s[0])}")
            summary.append(f"margin: {_fmt_float(runs[0].margin.min_margin)}")
        if cfg.compare:
            gap = _solver_gap(gait, starts[0], cfg.t0, periods, steps, cfg.tol)
            write_json(out / "compare.json", gap)
            summary.append(f"solver_sup_distance: {_fmt_float(gap['sup_distance'])}")
    else:
        for i, z0 in enumerate(starts):
            tag = _suffix(i, len(starts))
            traj = simulate(problem, z0, cfg.t0, periods, steps, cfg.tol)
            if "trajectory" in cfg.reports:
                write_trajectory_csv(traj, out / f"trajectory{tag}.csv")
            if "convergence" in cfg.reports:
                rep = convergence_report(traj, cfg.tol_ft, Q_min=min(3, periods - 2))
                write_json(out / f"convergence{tag}.json", rep.to_json())
                if i == 0:
                    summary.append(f"classification: {rep.classification.kind}")
                    if rep.classification.ratio is not None:
                        summary.append(f"ratio: {_fmt_float(rep.classification.ratio)}")
                    summary.append(f"residual: {_fmt_float(rep.residual)}")

    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return 0


def _solver_gap(gait, x0, t0, periods, steps, tol) -> dict:
    run = simulate_reduced(gait, x0, t0, periods, steps, tol)
    oracle = incremental_oracle(gait, x0, t0, periods, steps, tol)
    gap = float(np.max(np.abs(run.motion.positions - oracle.motion.positions)))
    return {
        "sup_distance": gap,
        "periods": periods,
        "steps_per_period": steps,
        "h": gait.period / steps,
    }


def cmd_compare(args) -> int:
    cfg = RunConfig.load(args)
    sc, gait, problem, periods, steps = cfg.resolve()
    if gait is None:
        raise ConfigError("compare needs a gait scenario or an inline gait")
    rng = np.random.default_rng(cfg.seed)
    starts = _initial_states(cfg, sc, gait, problem, rng)
    gap = _solver_gap(gait, starts[0], cfg.t0, periods, steps, cfg.tol)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "compare.json", gap)
    print(f"sup distance between reduced and oracle trajectories: {_fmt_float(gap['sup_distance'])}")
    return 0


def cmd_check_gait(args) -> int:
    cfg = RunConfig.load(args)
    _, gait, _, _, _ = cfg.resolve()
    if gait is None:
        raise ConfigError("check-gait needs a gait scenario or an inline gait")
    bps = np.unique(np.concatenate([s.times for s in gait.mu_plus + gait.mu_minus]))
    grid = np.unique(np.concatenate([bps, np.linspace(0.0, gait.period, 101)]))
    report = check_gait_uniqueness(gait, grid)
    print(f"uniqueness margin: {_fmt_float(report.min_margin)}")
    print(f"worst time: {_fmt_float(report.worst_time)}")
    print(f"worst forward-slip subset (0-based blocks): {list(report.worst_subset)}")
    if report.min_margin <= cfg.tol:
        print("gait rejected: margin vanishes", file=sys.stderr)
        return 2
    return 0


def cmd_list_scenarios(_args) -> int:
    for name, sc in sorted(catalog().items()):
        dims = (
            f"N={sc.gait.num_blocks}" if sc.gait is not None else f"n={sc.problem.dim}"
        )
        print(
            f"{name:22s} {sc.kind:9s} {dims:5s} "
            f"T={_fmt_float(sc.gait.period if sc.gait else sc.problem.period)} "
            f"Q={sc.recommended_periods} M={sc.recommended_steps}"
        )
    return 0


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, with_run_flags: bool = True) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--scenario", help="bundled scenario name")
    if with_run_flags:
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for random initial states")
        p.add_argument("--periods", type=int, help="number of periods to simulate")
        p.add_argument("--steps", type=int, help="steps per period")
        p.add_argument("--t0", type=float, help="start time")
        p.add_argument("--starts", type=int, help="number of random initial states")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sweeplab",
        description="Periodic polyhedral sweeping processes and crawler gaits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and write reports")
    _add_common(p_run)
    p_run.add_argument("--compare", action="store_true", help="also cross-check gait runs against the oracle")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="reduced pipeline vs slip-pattern oracle")
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_chk = sub.add_parser("check-gait", help="report the uniqueness margin of a gait")
    _add_common(p_chk, with_run_flags=False)
    p_chk.set_defaults(func=cmd_check_gait)

    p_ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p_ls.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateGaitError as exc:
        print(f"rejected gait: {exc}", file=sys.stderr)
        return 2
    except InadmissibleStateError as exc:
        print(f"inadmissible initial state: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, GridAlignmentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 4
    except SweepLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
