"""Independent certification by sampling the flown trajectories on a time grid."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import Maneuver, velocity
from .scenario import Scenario

VIOLATION_TOL = 1e-6  # NM
SECOND = 1.0 / 3600.0  # hours
HORIZON_MARGIN = 0.2  # hours


class SimulationResult(NamedTuple):
    min_distance: float
    violation_times: list[float]
    worst_pair: tuple[int, int] | None

    @property
    def ok(self) -> bool:
        return not self.violation_times


def _maneuvers(avoidance, n: int) -> list[Maneuver]:
    if avoidance is None:
        return [Maneuver.nominal() for _ in range(n)]
    return list(getattr(avoidance, "maneuvers", avoidance))


def _turn_times(recovery, n: int) -> list[float] | None:
    if recovery is None:
        return None
    plans = getattr(recovery, "plans", None)
    if plans is not None and all(p is not None for p in plans):
        return [p.time for p in plans]
    return [float(t) for t in recovery]


def trajectory_legs(scenario: Scenario, avoidance=None, recovery=None):
    """Per-aircraft ``(start, v_avoid, turn_time, turn_point, v_recover)`` arrays.

    Without a recovery the aircraft stays on its avoidance ray forever
    (``turn_time = inf``).  The recovery leg heads for the target at nominal
    speed and continues past it on the same course.
    """
    ac = scenario.aircraft
    n = len(ac)
    mans = _maneuvers(avoidance, n)
    turns = _turn_times(recovery, n)
    start = np.array([[a.x0, a.y0] for a in ac], dtype=float).reshape(n, 2)
    v_av = np.array([velocity(a, m) for a, m in zip(ac, mans)], dtype=float).reshape(n, 2)
    t_turn = np.full(n, np.inf) if turns is None else np.array(turns, dtype=float)
    turn_pt = start + v_av * np.where(np.isfinite(t_turn), t_turn, 0.0)[:, None]
    v_rec = v_av.copy()
    for k, a in enumerate(ac):
        if not np.isfinite(t_turn[k]):
            continue
        ex, ey = a.target_x - turn_pt[k, 0], a.target_y - turn_pt[k, 1]
        # head for the target unless it is already abeam or behind, then resume the nominal heading
        ahead = ex * v_av[k, 0] + ey * v_av[k, 1] > 0.0
        course = math.atan2(ey, ex) if ahead else a.heading0
        v_rec[k] = (a.speed0 * math.cos(course), a.speed0 * math.sin(course))
    return start, v_av, t_turn, turn_pt, v_rec


def default_horizon(scenario: Scenario, avoidance=None, recovery=None) -> float:
    """Time for the slowest aircraft to pass its target, plus a margin."""
    start, v_av, t_turn, turn_pt, v_rec = trajectory_legs(scenario, avoidance, recovery)
    latest = 0.0
    for k, a in enumerate(scenario.aircraft):
        if np.isfinite(t_turn[k]):
            rest = math.hypot(a.target_x - turn_pt[k, 0], a.target_y - turn_pt[k, 1]) / a.speed0
            latest = max(latest, t_turn[k] + rest)
        else:
            speed = math.hypot(*v_av[k])
            latest = max(latest, math.hypot(a.target_x - a.x0, a.target_y - a.y0) / speed)
    return latest + HORIZON_MARGIN


def positions(scenario: Scenario, times: np.ndarray, avoidance=None, recovery=None) -> np.ndarray:
    """Positions with shape ``(n, len(times), 2)``."""
    start, v_av, t_turn, turn_pt, v_rec = trajectory_legs(scenario, avoidance, recovery)
    t = np.asarray(times, dtype=float)[None, :, None]
    before = start[:, None, :] + v_av[:, None, :] * t
    after = turn_pt[:, None, :] + v_rec[:, None, :] * (t - np.where(np.isfinite(t_turn), t_turn, 0.0)[:, None, None])
    return np.where(t <= t_turn[:, None, None], before, after)


def simulate(
    scenario: Scenario,
    avoidance=None,
    recovery=None,
    dt: float = SECOND,
    horizon: float | None = None,
    tol: float = VIOLATION_TOL,
) -> SimulationResult:
    """Sample every pairwise distance from t = 0 to the horizon.

    ``avoidance`` may be an avoidance solution or a maneuver list, ``recovery``
    a recovery solution or a list of turn times (hours).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = len(scenario.aircraft)
    if n < 2:
        return SimulationResult(math.inf, [], None)
    if horizon is None:
        horizon = default_horizon(scenario, avoidance, recovery)
    times = np.arange(0.0, horizon + 0.5 * dt, dt)
    pos = positions(scenario, times, avoidance, recovery)
    limit = scenario.d - tol
    best = math.inf
    worst = None
    bad = np.zeros(len(times), dtype=bool)
    for i in range(n - 1):
        diff = pos[i + 1:] - pos[i]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        k = int(np.argmin(dist.min(axis=1)))
        low = float(dist[k].min())
        if low < best:
            best, worst = low, (i, i + 1 + k)
        bad |= (dist < limit).any(axis=0)
    return SimulationResult(best, times[bad].tolist(), worst)


def brute_force_pair_min(dx: float, dy: float, vx: float, vy: float, t_hi: float = 1.0, steps: int = 10_000) -> tuple[float, float]:
    """Closest approach over ``[0, t_hi]`` by grid search and one Newton step on the squared distance."""
    t = np.linspace(0.0, t_hi, steps + 1)
    f = (dx + vx * t) ** 2 + (dy + vy * t) ** 2
    k = int(np.argmin(f))
    best_t, best_f = float(t[k]), float(f[k])
    v2 = vx * vx + vy * vy
    if v2 > 0.0:
        # squared distance is quadratic in t, so one Newton step lands on its minimiser
        grad = 2.0 * ((dx + vx * best_t) * vx + (dy + vy * best_t) * vy)
        cand = min(max(best_t - grad / (2.0 * v2), 0.0), t_hi)
        fc = (dx + vx * cand) ** 2 + (dy + vy * cand) ** 2
        if fc < best_f:
            best_t, best_f = cand, fc
    return best_t, math.sqrt(max(best_f, 0.0))


def pair_violations(scenario: Scenario, maneuvers: Sequence[Maneuver]) -> list[tuple[int, int]]:
    """Pairs whose avoidance rays come closer than ``d`` (closed form, for cross-checks)."""
    ac = scenario.aircraft
    out = []
    for i in range(len(ac)):
        for j in range(i + 1, len(ac)):
            vi = velocity(ac[i], maneuvers[i])
            vj = velocity(ac[j], maneuvers[j])
            dx, dy = ac[i].x0 - ac[j].x0, ac[i].y0 - ac[j].y0
            vx, vy = vi[0] - vj[0], vi[1] - vj[1]
            v2 = vx * vx + vy * vy
            t = 0.0 if v2 == 0.0 else max(0.0, -(dx * vx + dy * vy) / v2)
            if math.hypot(dx + vx * t, dy + vy * t) < scenario.d - VIOLATION_TOL:
                out.append((i, j))
    return out
