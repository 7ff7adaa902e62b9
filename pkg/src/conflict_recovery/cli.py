"""Command-line front end: generate instances, solve, validate, benchmark and report."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConflictRecoveryError, Infeasible, ParseError, TimeLimit
from .geometry import initial_conflict_set
from .oracle import SECOND, simulate, trajectory_legs
from .penalty_loop import MODES, PipelineResult, compare_modes, solve_mode, to_record
from .scenario import (
    CP_RADIUS,
    CP_SPEED,
    RCP_JITTER,
    Scenario,
    SolverConfig,
    generate_cp,
    generate_rcp,
    read_scenario,
    read_solution,
    write_scenario,
    write_solution,
)

log = logging.getLogger("conflict_recovery")

SWEEP_VALUES = tuple(round(0.1 * k, 1) for k in range(1, 10))
TIMING_COLUMNS = ("avoid_time_s", "rec_time_s", "total_time_s")
BENCH_COLUMNS = (
    "label",
    "n",
    "n_c",
    "avoid_obj",
    "avoid_gap",
    "avoid_time_s",
    "sum_abs_1mq",
    "sum_abs_theta",
    "sum_f",
    "rec_obj",
    "rec_time_s",
    "mean_t_h",
    "tc_initial",
    "tc_final",
    "iterations",
    "total_time_s",
    "tc_exact_naive",
    "tc_greedy_naive",
    "status",
)
SWEEP_COLUMNS = ("label", "parameter", "value", "sum_deviation", "sum_t2", "total_cost", "controlled", "status")


# ------------------------------------------------------------ argument helpers

def parse_range(text: str) -> list[int]:
    """``"4..15"``, ``"10,20"`` or ``"7"`` to a list of ints (inclusive ranges)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif re.fullmatch(r"-?\d+", part):
            out.append(int(part))
        else:
            raise argparse.ArgumentTypeError(f"cannot parse {part!r} as an integer or range")
    return out


def instance_from_label(label: str) -> Scenario:
    """Rebuild a benchmark instance from ``CP-n`` or ``RCP-n-seed``."""
    m = re.fullmatch(r"CP-(\d+)", label)
    if m:
        return generate_cp(int(m.group(1)))
    m = re.fullmatch(r"RCP-(\d+)-(\d+)", label)
    if m:
        return generate_rcp(int(m.group(1)), seed=int(m.group(2)))
    raise ValueError(f"unrecognised instance label {label!r}")


def _config_from_args(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        w=args.w,
        lambda_f=args.lambda_f,
        lambda_t=args.lambda_t,
        periods=args.periods,
        step=args.step_min / 60.0,
        threshold=args.threshold,
        relative_threshold=not args.absolute_threshold,
        max_iter=args.max_iter,
        time_limit=args.time_limit_s,
        instance_time_limit=args.instance_time_limit_s,
        seed=args.seed,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w", type=float, default=0.5, help="speed/heading trade-off weight in [0, 1]")
    p.add_argument("--lambda-f", type=float, default=1.0, help="fixed cost per controlled aircraft")
    p.add_argument("--lambda-t", type=float, default=0.25, help="weight on squared recovery time")
    p.add_argument("--periods", type=int, default=15, help="number of recovery periods")
    p.add_argument("--step-min", type=float, default=2.0, help="recovery period length in minutes")
    p.add_argument("--threshold", type=float, default=0.05, help="total-cost change that stops the loop (relative by default)")
    p.add_argument("--absolute-threshold", action="store_true", help="compare the cost change with --threshold directly")
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--time-limit-s", type=float, default=300.0, help="per-stage time limit")
    p.add_argument("--instance-time-limit-s", type=float, default=900.0, help="whole-instance time limit")
    p.add_argument("--seed", type=int, default=0)


# ------------------------------------------------------------ subcommands

def cmd_generate(args: argparse.Namespace) -> int:
    if args.type == "cp":
        sc = generate_cp(args.n, radius=args.radius, speed=args.speed)
    else:
        sc = generate_rcp(args.n, radius=args.radius, seed=args.seed, jitter=args.jitter)
    write_scenario(sc, args.out)
    print(f"{sc.label}: {len(sc)} aircraft, {len(initial_conflict_set(sc))} conflicting pairs -> {args.out}")
    return 0


def _summary(result: PipelineResult) -> str:
    av, rec, ledger = result
    return (
        f"controlled {len(av.controlled)}/{len(av.maneuvers)}, avoidance {av.objective:.6g} (gap {av.gap:.3g}, {av.status}), "
        f"recovery {rec.objective:.6g}, total cost {ledger.total:.6g}, iterations {ledger.iterations}"
    )


def cmd_solve(args: argparse.Namespace) -> int:
    sc = read_scenario(args.scenario)
    config = _config_from_args(args)
    result = solve_mode(sc, config, args.mode)
    write_solution(to_record(sc, result, config, args.mode), args.out)
    print(f"{sc.label or args.scenario} [{args.mode}]: {_summary(result)} -> {args.out}")
    if result.ledger.time_limited:
        print("warning: a time limit was reached; the reported solution may be suboptimal", file=sys.stderr)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    sc = read_scenario(args.scenario)
    sol = read_solution(args.solution)
    if len(sol.maneuvers) != len(sc):
        raise ParseError(
            f"solution has {len(sol.maneuvers)} aircraft, scenario has {len(sc)}", path=args.solution, field="aircraft"
        )
    res = simulate(sc, sol.maneuvers, sol.recovery_times, dt=args.dt_s * SECOND)
    if res.ok:
        print(f"ok: minimum separation {res.min_distance:.6f} NM (d = {sc.d} NM)")
        return 0
    first = res.violation_times[0] * 60.0
    print(
        f"violation: minimum separation {res.min_distance:.6f} NM between aircraft {res.worst_pair}, "
        f"{len(res.violation_times)} samples below d, first at {first:.2f} min"
    )
    return 1


def _fmt(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def benchmark_row(label: str, config: SolverConfig) -> dict:
    """One CSV row: penalty-loop result plus both baselines' total cost."""
    sc = instance_from_label(label)
    row: dict = {c: math.nan for c in BENCH_COLUMNS}
    row.update(label=label, n=len(sc), n_c=len(initial_conflict_set(sc)))
    t0 = time.monotonic()
    try:
        modes = compare_modes(sc, config)
    except (Infeasible, TimeLimit) as exc:
        row["status"] = "infeasible" if isinstance(exc, Infeasible) else "time_limit"
        row["total_time_s"] = time.monotonic() - t0
        return row
    av, rec, ledger = modes["penalty"]
    best = ledger.rows[ledger.best_iteration]
    row.update(
        avoid_obj=av.objective,
        avoid_gap=av.gap,
        avoid_time_s=sum(r.avoidance_time for r in ledger.rows),
        sum_abs_1mq=sum(abs(1.0 - m.q) for m in av.maneuvers),
        sum_abs_theta=sum(abs(m.theta) for m in av.maneuvers),
        sum_f=sum(m.controlled for m in av.maneuvers),
        rec_obj=best.recovery_objective,
        rec_time_s=sum(r.recovery_time for r in ledger.rows),
        mean_t_h=float(np.mean([p * config.step for p in rec.periods])),
        tc_initial=ledger.initial_total,
        tc_final=ledger.total,
        iterations=ledger.iterations,
        total_time_s=time.monotonic() - t0,
        tc_exact_naive=modes["exact-naive"].ledger.total,
        tc_greedy_naive=modes["greedy-naive"].ledger.total if "greedy-naive" in modes else math.nan,
        status="time_limit" if ledger.time_limited else "ok",
    )
    return row


def _labels(args: argparse.Namespace) -> list[str]:
    if args.suite == "cp":
        return [f"CP-{n}" for n in args.sizes]
    return [f"RCP-{n}-{s}" for n in args.sizes for s in args.seeds]


def _write_csv(rows: Sequence[dict], columns: Sequence[str], out) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return text


def cmd_benchmark(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    labels = _labels(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            # map keeps instance order whatever the completion order
            rows = list(pool.map(benchmark_row, labels, [config] * len(labels)))
    else:
        rows = [benchmark_row(label, config) for label in labels]
    columns = [c for c in BENCH_COLUMNS if args.timing or c not in TIMING_COLUMNS]
    _write_csv(rows, columns, args.out)
    return 0


# ------------------------------------------------------------ report

def plot_trajectories(sc: Scenario, result: PipelineResult, path: Path) -> None:
    """Nominal tracks in grey, avoidance legs in green, recovery legs in orange."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    av, rec, _ = result
    start, v_av, t_turn, turn_pt, v_rec = trajectory_legs(sc, av, rec)
    fig, ax = plt.subplots(figsize=(6, 6))
    for k, a in enumerate(sc.aircraft):
        ax.plot([a.x0, a.target_x], [a.y0, a.target_y], color="0.7", ls="--", lw=0.8)
        ax.plot([start[k, 0], turn_pt[k, 0]], [start[k, 1], turn_pt[k, 1]], color="tab:green", lw=1.4)
        rest = math.hypot(a.target_x - turn_pt[k, 0], a.target_y - turn_pt[k, 1]) / a.speed0
        end = turn_pt[k] + v_rec[k] * rest
        ax.plot([turn_pt[k, 0], end[0]], [turn_pt[k, 1], end[1]], color="tab:orange", lw=1.4)
        ax.plot(a.x0, a.y0, "k.", ms=3)
    ax.set_aspect("equal")
    ax.set_xlabel("x (NM)")
    ax.set_ylabel("y (NM)")
    ax.set_title(sc.label)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def sweep_rows(label: str, config: SolverConfig, values: Sequence[float] = SWEEP_VALUES) -> list[dict]:
    """Penalty loop over a grid of ``lambda_f`` and ``lambda_t`` values, one parameter at a time."""
    sc = instance_from_label(label)
    rows = []
    for param in ("lambda_f", "lambda_t"):
        for value in values:
            row = {"label": label, "parameter": param, "value": value}
            try:
                av, rec, ledger = solve_mode(sc, replace(config, **{param: value}), "penalty")
            except (Infeasible, TimeLimit) as exc:
                row.update(sum_deviation=math.nan, sum_t2=math.nan, total_cost=math.nan, controlled=0, status=type(exc).__name__)
            else:
                row.update(
                    sum_deviation=sum((1.0 - m.q) ** 2 + m.theta ** 2 for m in av.maneuvers),
                    sum_t2=sum((p * config.step) ** 2 for p in rec.periods),
                    total_cost=ledger.total,
                    controlled=len(av.controlled),
                    status="ok",
                )
            rows.append(row)
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    try:
        with open(args.input, newline="") as fh:
            labels = [row["label"] for row in csv.DictReader(fh)]
    except KeyError:
        raise ParseError("benchmark CSV needs a label column", path=args.input, field="label") from None
    except OSError as exc:
        raise ParseError(str(exc), path=args.input) from None
    plots = Path(args.plots)
    plots.mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args)
    for label in labels:
        sc = instance_from_label(label)
        try:
            result = solve_mode(sc, config, "penalty")
        except (Infeasible, TimeLimit) as exc:
            print(f"{label}: no plot ({exc})", file=sys.stderr)
            continue
        plot_trajectories(sc, result, plots / f"{label}.svg")
        print(f"{label}: {plots / (label + '.svg')}")
    for label in args.sweep if args.sweep is not None else labels:
        out = plots / f"sweep_{label}.csv"
        _write_csv(sweep_rows(label, config), SWEEP_COLUMNS, out)
        print(f"{label}: {out}")
    return 0


# ------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conflict-recovery", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress (repeat for more)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a benchmark scenario")
    p.add_argument("--type", choices=("cp", "rcp"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius", type=float, default=CP_RADIUS)
    p.add_argument("--speed", type=float, default=CP_SPEED, help="circle-problem speed (knots)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=RCP_JITTER, help="random-circle aim-point radius (NM)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve a scenario and write the solution")
    p.add_argument("--scenario", required=True)
    _add_solver_flags(p)
    p.add_argument("--mode", choices=MODES, default="penalty")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="simulate a solution; exit 0 iff separation holds")
    p.add_argument("--scenario", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--dt-s", type=float, default=1.0, help="sampling step in seconds")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("benchmark", help="run a benchmark suite and write a CSV")
    p.add_argument("--suite", choices=("cp", "rcp"), required=True)
    p.add_argument("--sizes", type=parse_range, required=True, help='e.g. "4..15" or "10,20"')
    p.add_argument("--seeds", type=parse_range, default=[0], help="random-circle seeds, e.g. 0..4")
    _add_solver_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="instances solved in parallel")
    p.add_argument("--timing", action="store_true", help="include wall-clock columns (output is then not reproducible)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="trajectory plots and cost-weight sweeps for the instances in a benchmark CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--plots", required=True, help="output directory")
    p.add_argument("--sweep", nargs="*", default=None, help="instance labels to sweep (default: all in the CSV)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (Infeasible, TimeLimit) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (ConflictRecoveryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
