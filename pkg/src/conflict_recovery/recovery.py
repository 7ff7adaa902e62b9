"""Trajectory recovery: pick the period at which each aircraft turns back to its target.

Each aircraft flies its avoidance leg until ``t = m * step`` and then heads
straight for its target at nominal speed.  For every pair the period
combinations that would reintroduce a conflict are tabulated once
(:func:`build_omega_sets`); the exact solver and the greedy baseline then work
purely on those tables.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DegenerateRecovery, Infeasible, TimeLimit
from .geometry import AircraftState, Maneuver, position, separated_mask, velocity
from .scenario import Scenario


@dataclass(frozen=True)
class RecoveryPlan:
    period: int
    time: float
    turn_x: float
    turn_y: float
    theta_r: float
    d_a: float
    d_r: float
    heading_r: float  # course flown on the recovery leg (radians)
    speed_r: float


def recovery_angle(theta: float, d_a: float, d_r: float) -> float:
    """Heading correction at the turn point, from the triangle start / turn point / target."""
    if theta == 0.0:
        return 0.0
    if d_r == 0.0:
        raise DegenerateRecovery("turn point coincides with target")
    ratio = d_a * math.sin(theta) / d_r
    return math.asin(max(-1.0, min(1.0, ratio)))


def recovery_course(state: AircraftState, maneuver: Maneuver, tx: float, ty: float) -> float:
    """Course flown after turning at ``(tx, ty)``.

    Straight for the target while it is still ahead on the avoidance course;
    once it is abeam or behind, the aircraft resumes its nominal heading
    rather than doubling back.
    """
    ex, ey = state.target_x - tx, state.target_y - ty
    vx, vy = velocity(state, maneuver)
    if ex * vx + ey * vy > 0.0:
        return math.atan2(ey, ex)
    return state.heading0


def recovery_geometry(state: AircraftState, maneuver: Maneuver, t: float, period: int | None = None, step: float | None = None) -> RecoveryPlan:
    if t < 0.0:
        raise ValueError("recovery time must be non-negative")
    tx, ty = position(state, maneuver, t)
    d_a = math.hypot(tx - state.x0, ty - state.y0)
    d_r = math.hypot(state.target_x - tx, state.target_y - ty)
    theta_r = recovery_angle(maneuver.theta, d_a, d_r)
    if period is None:
        period = int(round(t / step)) if step else 0
    return RecoveryPlan(period, t, tx, ty, theta_r, d_a, d_r, recovery_course(state, maneuver, tx, ty), state.speed0)


@dataclass
class OmegaSets:
    """Conflicting period pairs per aircraft pair ``(i, j)`` with ``i < j``.

    ``forbidden_rr[(i, j)]`` holds ``(m, n)`` where both recovery legs conflict,
    ``forbidden_ar`` pairs with ``m > n`` (``i`` still avoiding when ``j`` turns)
    and ``forbidden_ra`` pairs with ``m < n``.
    """

    n: int
    periods: int
    step: float
    plans: list[list[RecoveryPlan]]
    forbidden_rr: dict[tuple[int, int], set[tuple[int, int]]]
    forbidden_ar: dict[tuple[int, int], set[tuple[int, int]]]
    forbidden_ra: dict[tuple[int, int], set[tuple[int, int]]]
    tau_ar: dict[tuple[int, int], list[float]]
    tau_ra: dict[tuple[int, int], list[float]]
    _matrix: dict[tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    def matrix(self, i: int, j: int) -> np.ndarray:
        """Boolean ``(T+1, T+1)`` table, True where periods ``(m_i, m_j)`` conflict."""
        if i > j:
            return self.matrix(j, i).T
        key = (i, j)
        if key not in self._matrix:
            size = self.periods + 1
            mat = np.zeros((size, size), dtype=bool)
            for table in (self.forbidden_rr, self.forbidden_ar, self.forbidden_ra):
                for m, n in table.get(key, ()):
                    mat[m, n] = True
            self._matrix[key] = mat
        return self._matrix[key]

    def forbidden(self, i: int, m: int, j: int, n: int) -> bool:
        return bool(self.matrix(i, j)[m, n])


    @classmethod
    def from_tables(cls, n: int, periods: int, step: float, rr=None, ar=None, ra=None) -> "OmegaSets":
        """Omega sets given directly as tables (no geometry attached)."""
        rr, ar, ra = rr or {}, ar or {}, ra or {}
        for (m, k) in (pk for v in ar.values() for pk in v):
            if not m > k:
                raise ValueError("forbidden_ar entries need m > n")
        for (m, k) in (pk for v in ra.values() for pk in v):
            if not m < k:
                raise ValueError("forbidden_ra entries need m < n")
        return cls(n, periods, step, [[] for _ in range(n)], rr, ar, ra, {}, {})


def _conflict_start(dx, dy, vx, vy, d: float) -> np.ndarray:
    """Time until the separation first drops below ``d`` (0 if already inside, inf if never)."""
    dx, dy, vx, vy = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (dx, dy, vx, vy)))
    c = dx * dx + dy * dy - d * d
    a = vx * vx + vy * vy
    b = dx * vx + dy * vy
    disc = b * b - a * c
    tau = np.full(dx.shape, np.inf)
    inside = c < 0.0
    hit = (~inside) & (b < 0.0) & (disc > 0.0) & (a > 0.0)
    tau[inside] = 0.0
    # smaller root of a t^2 + 2 b t + c, written to avoid cancellation
    tau[hit] = c[hit] / (-b[hit] + np.sqrt(disc[hit]))
    return tau


def build_omega_sets(scenario: Scenario, avoidance, periods: int, step: float) -> OmegaSets:
    """Tabulate conflicting recovery-period combinations for every pair."""
    maneuvers: Sequence[Maneuver] = getattr(avoidance, "maneuvers", avoidance)
    ac = scenario.aircraft
    n = len(ac)
    d = scenario.d
    size = periods + 1
    times = np.arange(size) * step
    plans = [[recovery_geometry(a, m, float(t), k, step) for k, t in enumerate(times)] for a, m in zip(ac, maneuvers)]
    start = np.array([[a.x0, a.y0] for a in ac])
    v_av = np.array([velocity(a, m) for a, m in zip(ac, maneuvers)])
    turn = np.array([[[p.turn_x, p.turn_y] for p in row] for row in plans]).reshape(n, size, 2)
    v_rec = np.array(
        [[[p.speed_r * math.cos(p.heading_r), p.speed_r * math.sin(p.heading_r)] for p in row] for row in plans]
    ).reshape(n, size, 2)

    M, N = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    t0 = np.maximum(M, N) * step
    rr, ar, ra, tau_ar, tau_ra = {}, {}, {}, {}, {}
    for i, j in combinations(range(n), 2):
        # both on recovery legs from t0 = max(t_i, t_j)
        pi = turn[i][M] + v_rec[i][M] * (t0 - M * step)[..., None]
        pj = turn[j][N] + v_rec[j][N] * (t0 - N * step)[..., None]
        rel = pi - pj
        vel = v_rec[i][M] - v_rec[j][N]
        ok = separated_mask(rel[..., 0], rel[..., 1], vel[..., 0], vel[..., 1], d)
        rr[(i, j)] = {(int(m), int(k)) for m, k in zip(*np.nonzero(~ok))}

        # i avoiding, j recovered at t0 = n * step
        pos_i = start[i] + v_av[i] * times[:, None]
        rel = pos_i - turn[j]
        vel = v_av[i] - v_rec[j]
        tau = times + _conflict_start(rel[:, 0], rel[:, 1], vel[:, 0], vel[:, 1], d)
        tau_ar[(i, j)] = tau.tolist()
        ar[(i, j)] = {(m, k) for k in range(size) for m in range(k + 1, size) if times[m] > tau[k]}

        # i recovered at t0 = m * step, j avoiding
        pos_j = start[j] + v_av[j] * times[:, None]
        rel = turn[i] - pos_j
        vel = v_rec[i] - v_av[j]
        tau = times + _conflict_start(rel[:, 0], rel[:, 1], vel[:, 0], vel[:, 1], d)
        tau_ra[(i, j)] = tau.tolist()
        ra[(i, j)] = {(m, k) for m in range(size) for k in range(m + 1, size) if times[k] > tau[m]}
    return OmegaSets(n, periods, step, plans, rr, ar, ra, tau_ar, tau_ra)


def avoidance_cost_a(maneuver: Maneuver, w: float, lambda_f: float) -> float:
    cost = (1.0 - w) * (1.0 - maneuver.q) ** 2 + w * maneuver.theta ** 2
    return cost + (lambda_f if maneuver.controlled else 0.0)


@dataclass
class RecoverySolution:
    periods: list[int]
    plans: list[RecoveryPlan | None]
    alpha: dict[tuple[int, int], bool]
    beta: dict[tuple[int, int], bool]
    objective: float
    runtime: float
    status: str = "optimal"

    @property
    def times(self) -> list[float]:
        return [p.time for p in self.plans] if all(self.plans) else []


def recovery_objective(periods: Sequence[int], a: Sequence[float], step: float) -> float:
    return float(sum(ai * (m * step) ** 2 for ai, m in zip(a, periods)))


def is_compatible(omega: OmegaSets, periods: Sequence[int]) -> bool:
    return not any(omega.forbidden(i, periods[i], j, periods[j]) for i, j in combinations(range(len(periods)), 2))


def _finish(omega: OmegaSets, periods: list[int], a, t_start: float, status: str = "optimal") -> RecoverySolution:
    n = len(periods)
    alpha, beta = {}, {}
    for i, j in combinations(range(n), 2):
        alpha[(i, j)] = periods[i] < periods[j]
        beta[(i, j)] = periods[i] > periods[j]
    plans = [omega.plans[i][m] if omega.plans[i] else None for i, m in enumerate(periods)]
    return RecoverySolution(
        list(periods), plans, alpha, beta, recovery_objective(periods, a, omega.step), time.monotonic() - t_start, status
    )


def solve_recovery_exact(omega: OmegaSets, a: Sequence[float], periods: int | None = None, step: float | None = None, *, time_limit: float | None = None) -> RecoverySolution:
    """Globally optimal periods minimising ``sum a_i * t_i**2`` by depth-first branch-and-bound."""
    t_start = time.monotonic()
    n = omega.n
    size = omega.periods + 1
    step = omega.step if step is None else step
    a = [float(x) for x in a]
    order = sorted(range(n), key=lambda k: (-a[k], k))
    sq = (np.arange(size) * step) ** 2
    mats = {(i, j): omega.matrix(i, j) for i, j in combinations(range(n), 2)}
    deadline = math.inf if time_limit is None else t_start + time_limit

    best_cost = math.inf
    best: list[int] | None = None
    assign = [-1] * n
    timed_out = False

    def rec(depth: int, domains: list[np.ndarray], cost: float) -> None:
        nonlocal best_cost, best, timed_out
        if timed_out:
            return
        if time.monotonic() > deadline:
            timed_out = True
            return
        if depth == n:
            if cost < best_cost:
                best_cost, best = cost, list(assign)
            return
        k = order[depth]
        for m in np.flatnonzero(domains[k]):
            c = cost + a[k] * sq[m]
            if c >= best_cost:
                break  # values ascend, so later ones cost at least as much
            new = list(domains)
            bound = c
            dead = False
            for u in order[depth + 1:]:
                mat = mats[(k, u)][m] if k < u else mats[(u, k)][:, m]
                dom = domains[u] & ~mat
                if not dom.any():
                    dead = True
                    break
                new[u] = dom
                bound += a[u] * sq[np.argmax(dom)]
            if dead or bound >= best_cost:
                continue
            assign[k] = int(m)
            rec(depth + 1, new, c)
            assign[k] = -1

    rec(0, [np.ones(size, dtype=bool) for _ in range(n)], 0.0)
    if best is None:
        if timed_out:
            raise TimeLimit("recovery stage hit its time limit without a feasible assignment")
        raise Infeasible("no conflict-free assignment of recovery periods")
    return _finish(omega, best, a, t_start, "time_limit" if timed_out else "optimal")


def solve_recovery_greedy(omega: OmegaSets, a: Sequence[float], r: Sequence[float], periods: int | None = None, step: float | None = None) -> RecoverySolution:
    """Period sweep that fixes aircraft in priority order (largest ``r`` first) once compatible."""
    t_start = time.monotonic()
    n = omega.n
    last = omega.periods
    order = sorted(range(n), key=lambda k: (-r[k], k))
    fixed: dict[int, int] = {}
    for m in range(last + 1):
        changed = True
        while changed:
            changed = False
            for k in order:
                if k in fixed:
                    continue
                if any(omega.forbidden(k, m, j, p) for j, p in fixed.items()):
                    continue
                # aircraft still avoiding may turn as late as the last period
                if any(omega.forbidden(k, m, u, last) for u in range(n) if u != k and u not in fixed):
                    continue
                fixed[k] = m
                changed = True
    if len(fixed) < n:
        raise Infeasible("greedy sweep left aircraft without a recovery period")
    return _finish(omega, [fixed[k] for k in range(n)], a, t_start)
