"""Alternate avoidance and recovery, feeding each aircraft's recovery cost back as a control penalty."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .avoidance import AvoidanceSolution, deviation_cost, solve_avoidance
from .errors import Infeasible, TimeLimit
from .recovery import (
    OmegaSets,
    RecoverySolution,
    avoidance_cost_a,
    build_omega_sets,
    solve_recovery_exact,
    solve_recovery_greedy,
)
from .scenario import Scenario, SolutionRecord, SolverConfig

log = logging.getLogger(__name__)

MODES = ("penalty", "exact-naive", "greedy-naive")


@dataclass(frozen=True)
class IterationRow:
    iteration: int
    total_cost: float
    delta: float | None
    avoidance_objective: float
    avoidance_gap: float
    avoidance_time: float
    avoidance_status: str
    recovery_objective: float
    recovery_time: float
    controlled: int


@dataclass
class CostLedger:
    """Per-aircraft costs of the reported iterate plus the per-iteration history."""

    a: list[float] = field(default_factory=list)
    r: list[float] = field(default_factory=list)
    tc: list[float] = field(default_factory=list)
    totals: list[float] = field(default_factory=list)
    delta_tc: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    best_iteration: int = 0
    rows: list[IterationRow] = field(default_factory=list)
    runtime: float = 0.0
    time_limited: bool = False
    stop_reason: str = "max_iter"  # or converged, time_limit, infeasible

    @property
    def total(self) -> float:
        return float(sum(self.tc))

    @property
    def initial_total(self) -> float:
        return self.totals[0] if self.totals else 0.0

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "r": self.r,
            "tc": self.tc,
            "totals": self.totals,
            "delta_tc": self.delta_tc,
            "iterations": self.iterations,
            "converged": self.converged,
            "best_iteration": self.best_iteration,
            "time_limited": self.time_limited,
            "stop_reason": self.stop_reason,
        }


class PipelineResult(NamedTuple):
    avoidance: AvoidanceSolution
    recovery: RecoverySolution
    ledger: CostLedger


@dataclass
class _Iterate:
    avoidance: AvoidanceSolution
    omega: OmegaSets
    recovery: RecoverySolution
    a: list[float]
    r_next: list[float]
    tc: list[float]

    @property
    def total(self) -> float:
        return float(sum(self.tc))


def trajectory_costs(avoidance: AvoidanceSolution, recovery: RecoverySolution, config: SolverConfig):
    """Per-aircraft ``(a_i, r_i, TC_i)`` for a pair of stage solutions."""
    a, r, tc = [], [], []
    for m, period in zip(avoidance.maneuvers, recovery.periods):
        t = period * config.step
        late = config.lambda_t * t * t
        a_i = avoidance_cost_a(m, config.w, config.lambda_f)
        a.append(a_i)
        r.append(deviation_cost(m.q, m.theta, config.w) + late)
        tc.append(a_i + late)
    return a, r, tc


def _converged(delta: float, previous: float, config: SolverConfig) -> bool:
    limit = config.threshold * abs(previous) if config.relative_threshold else config.threshold
    return abs(delta) <= limit


def _remaining(deadline: float) -> float:
    return deadline - time.monotonic()


def _iterations(scenario: Scenario, config: SolverConfig, max_iter: int, t_start: float):
    """Run the loop; returns the iterate history and convergence bookkeeping."""
    deadline = t_start + config.instance_time_limit
    n = len(scenario.aircraft)
    r = [0.0] * n
    history: list[_Iterate] = []
    deltas: list[float] = []
    converged = False
    limited = False
    reason = "max_iter"
    for it in range(max_iter):
        budget = min(config.time_limit, _remaining(deadline))
        if it > 0 and budget <= 0.0:
            limited, reason = True, "time_limit"
            break
        try:
            av = solve_avoidance(scenario, config, r, time_limit=max(budget, 0.0))
            omega = build_omega_sets(scenario, av, config.periods, config.step)
            a = [avoidance_cost_a(m, config.w, config.lambda_f) for m in av.maneuvers]
            rec_budget = max(min(config.time_limit, _remaining(deadline)), 1.0)
            rec = solve_recovery_exact(omega, a, time_limit=rec_budget)
        except (Infeasible, TimeLimit) as exc:
            # a later iterate failing leaves the earlier ones valid
            if not history:
                raise
            log.info("iteration %d stopped: %s", it, exc)
            reason = "infeasible" if isinstance(exc, Infeasible) else "time_limit"
            limited = limited or isinstance(exc, TimeLimit)
            break
        a, r_next, tc = trajectory_costs(av, rec, config)
        cur = _Iterate(av, omega, rec, a, r_next, tc)
        history.append(cur)
        limited = limited or av.time_limited or rec.status == "time_limit"
        log.info("iteration %d: TC %.6f, %d controlled", it, cur.total, len(av.controlled))
        if len(history) > 1:
            delta = cur.total - history[-2].total
            deltas.append(delta)
            if _converged(delta, history[-2].total, config):
                converged, reason = True, "converged"
                break
        if r_next == r:
            # same penalties give the same next iterate, so the change would be zero
            deltas.append(0.0)
            converged, reason = True, "converged"
            break
        r = r_next
    return history, deltas, converged, limited, reason


def _ledger(history: list[_Iterate], best: int, deltas, converged: bool, limited: bool, t_start: float, reason: str = "max_iter") -> CostLedger:
    it = history[best]
    rows = []
    for k, h in enumerate(history):
        rows.append(
            IterationRow(
                iteration=k,
                total_cost=h.total,
                delta=None if k == 0 else h.total - history[k - 1].total,
                avoidance_objective=h.avoidance.objective,
                avoidance_gap=h.avoidance.gap,
                avoidance_time=h.avoidance.runtime,
                avoidance_status=h.avoidance.status,
                recovery_objective=h.recovery.objective,
                recovery_time=h.recovery.runtime,
                controlled=len(h.avoidance.controlled),
            )
        )
    return CostLedger(
        a=list(it.a),
        r=list(it.r_next),
        tc=list(it.tc),
        totals=[h.total for h in history],
        delta_tc=list(deltas),
        iterations=len(history),
        converged=converged,
        best_iteration=best,
        rows=rows,
        runtime=time.monotonic() - t_start,
        time_limited=limited,
        stop_reason=reason,
    )


def _best_index(history: list[_Iterate]) -> int:
    return min(range(len(history)), key=lambda k: (history[k].total, k))


def run(scenario: Scenario, config: SolverConfig | None = None) -> PipelineResult:
    """Penalty loop; reports the iterate with the lowest total trajectory cost."""
    config = config or SolverConfig()
    t_start = time.monotonic()
    history, deltas, converged, limited, reason = _iterations(scenario, config, config.max_iter, t_start)
    best = _best_index(history)
    it = history[best]
    return PipelineResult(it.avoidance, it.recovery, _ledger(history, best, deltas, converged, limited, t_start, reason))


def exact_naive(scenario: Scenario, config: SolverConfig | None = None) -> PipelineResult:
    """One pass of each stage: avoidance without penalties, then exact recovery."""
    config = config or SolverConfig()
    return run(scenario, replace(config, max_iter=1))


def _greedy_from(scenario: Scenario, config: SolverConfig, av: AvoidanceSolution, omega: OmegaSets, t_start: float) -> PipelineResult:
    a = [avoidance_cost_a(m, config.w, config.lambda_f) for m in av.maneuvers]
    # recovery times are unknown before the sweep, so priority uses the deviation part only
    priority = [deviation_cost(m.q, m.theta, config.w) for m in av.maneuvers]
    rec = solve_recovery_greedy(omega, a, priority)
    a, r_next, tc = trajectory_costs(av, rec, config)
    history = [_Iterate(av, omega, rec, a, r_next, tc)]
    return PipelineResult(av, rec, _ledger(history, 0, [], False, av.time_limited, t_start, "max_iter"))


def greedy_naive(scenario: Scenario, config: SolverConfig | None = None) -> PipelineResult:
    """Avoidance without penalties, then the priority sweep instead of exact recovery."""
    config = config or SolverConfig()
    t_start = time.monotonic()
    av = solve_avoidance(scenario, config, None, time_limit=min(config.time_limit, config.instance_time_limit))
    omega = build_omega_sets(scenario, av, config.periods, config.step)
    return _greedy_from(scenario, config, av, omega, t_start)


def solve_mode(scenario: Scenario, config: SolverConfig, mode: str = "penalty") -> PipelineResult:
    if mode == "penalty":
        return run(scenario, config)
    if mode == "exact-naive":
        return exact_naive(scenario, config)
    if mode == "greedy-naive":
        return greedy_naive(scenario, config)
    raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")


def compare_modes(scenario: Scenario, config: SolverConfig | None = None) -> dict[str, PipelineResult]:
    """All three modes from a single loop run (both baselines share its first avoidance).

    The greedy entry is missing when the priority sweep cannot place every aircraft.
    """
    config = config or SolverConfig()
    t_start = time.monotonic()
    history, deltas, converged, limited, reason = _iterations(scenario, config, config.max_iter, t_start)
    best = _best_index(history)
    it = history[best]
    first = history[0]
    first_limited = first.avoidance.time_limited or first.recovery.status == "time_limit"
    single = len(history) == 1
    results = {
        "penalty": PipelineResult(it.avoidance, it.recovery, _ledger(history, best, deltas, converged, limited, t_start, reason)),
        "exact-naive": PipelineResult(
            first.avoidance,
            first.recovery,
            _ledger([first], 0, deltas if single else [], converged and single, first_limited, t_start, reason if single else "max_iter"),
        ),
    }
    try:
        results["greedy-naive"] = _greedy_from(scenario, config, first.avoidance, first.omega, t_start)
    except Infeasible as exc:
        log.info("greedy recovery failed: %s", exc)
    return results


def to_record(scenario: Scenario, result: PipelineResult, config: SolverConfig, mode: str = "penalty") -> SolutionRecord:
    """File-level record of a pipeline result."""
    av, rec, ledger = result
    meta = {
        "avoidance_objective": av.objective,
        "avoidance_lower_bound": av.lower_bound,
        "avoidance_gap": av.gap,
        "avoidance_status": av.status,
        "recovery_objective": rec.objective,
        "total_cost": ledger.total,
        "time_limited": ledger.time_limited,
    }
    return SolutionRecord(
        maneuvers=list(av.maneuvers),
        periods=list(rec.periods),
        step=config.step,
        ids=[a.id for a in scenario.aircraft],
        label=scenario.label,
        mode=mode,
        ledger=ledger.to_dict(),
        meta=meta,
    )


def total_cost(result: PipelineResult) -> float:
    return result.ledger.total if result.ledger.tc else math.nan
