import math

import numpy as np
import pytest

from conflict_recovery.errors import DegenerateRecovery, Infeasible
from conflict_recovery.geometry import AircraftState, Maneuver
from conflict_recovery.recovery import (
    OmegaSets,
    avoidance_cost_a,
    build_omega_sets,
    is_compatible,
    recovery_angle,
    recovery_geometry,
    solve_recovery_exact,
    solve_recovery_greedy,
)
from conflict_recovery.scenario import Scenario, generate_cp

from oracles import brute_recovery

STEP = 2.0 / 60.0


def east(ident=0, x=0.0, y=0.0, speed=500.0):
    return AircraftState(ident, x, y, 0.0, speed, x + 200.0, y)


# ------------------------------------------------------------ geometry

def test_straight_flight_has_no_recovery_angle():
    plan = recovery_geometry(east(), Maneuver.nominal(), 0.1)
    assert plan.d_a == pytest.approx(50.0)
    assert plan.theta_r == 0.0
    assert plan.heading_r == pytest.approx(0.0)


def test_recovery_angle_by_hand():
    assert recovery_angle(math.pi / 6, 10.0, 40.0) == pytest.approx(math.asin(10 * 0.5 / 40), abs=1e-12)
    assert recovery_angle(math.pi / 6, 10.0, 40.0) == pytest.approx(0.12533, abs=1e-5)
    with pytest.raises(DegenerateRecovery):
        recovery_angle(0.2, 10.0, 0.0)


def test_turn_at_time_zero_is_the_start():
    plan = recovery_geometry(east(x=3.0, y=4.0), Maneuver(0.95, 0.3, True), 0.0)
    assert (plan.turn_x, plan.turn_y) == (3.0, 4.0)
    assert plan.d_a == 0.0 and plan.theta_r == 0.0


def test_recovery_leg_aims_at_target_then_resumes_nominal_heading():
    m = Maneuver(1.0, math.radians(20), True)
    early = recovery_geometry(east(), m, 0.1)
    assert math.atan2(-early.turn_y, 200.0 - early.turn_x) == pytest.approx(early.heading_r)
    assert early.speed_r == 500.0
    # after the target is abeam the aircraft does not double back
    late = recovery_geometry(east(), m, 0.5)
    assert late.turn_x > 200.0
    assert late.heading_r == pytest.approx(0.0)


def test_avoidance_cost_by_hand():
    assert avoidance_cost_a(Maneuver.nominal(), 0.5, 1.0) == 0.0
    assert avoidance_cost_a(Maneuver(1.0, math.pi / 6, True), 0.5, 1.0) == pytest.approx(1.1371, abs=1e-4)
    assert avoidance_cost_a(Maneuver(0.94, 0.5, True), 0.0, 1.0) == pytest.approx(1.0 + 0.06 ** 2)


# ------------------------------------------------------------ omega sets

def _sample_positions(state, man, t_turn, times):
    """Piecewise positions written out directly: avoidance ray, then a target-bound (or nominal) leg."""
    v = state.speed0 * man.q
    h = state.heading0 + man.theta
    ax = state.x0 + v * math.cos(h) * np.minimum(times, t_turn)
    ay = state.y0 + v * math.sin(h) * np.minimum(times, t_turn)
    tx, ty = state.x0 + v * math.cos(h) * t_turn, state.y0 + v * math.sin(h) * t_turn
    ex, ey = state.target_x - tx, state.target_y - ty
    course = math.atan2(ey, ex) if ex * math.cos(h) + ey * math.sin(h) > 0 else state.heading0
    after = np.maximum(times - t_turn, 0.0)
    return ax + state.speed0 * math.cos(course) * after, ay + state.speed0 * math.sin(course) * after


def test_parallel_recovery_legs_never_conflict():
    sc = Scenario((east(0), east(1, y=10.0)))
    om = build_omega_sets(sc, [Maneuver(0.97, 0.0, True), Maneuver.nominal()], 15, STEP)
    assert not om.matrix(0, 1).any()


def test_head_on_recovery_legs_conflict_early():
    sc = generate_cp(2)
    mans = [Maneuver(1.0, math.radians(20), True), Maneuver(1.0, math.radians(20), True)]
    om = build_omega_sets(sc, mans, 15, STEP)
    times = np.arange(0.0, 0.8, 1.0 / 3600.0)
    bad = []
    for m in range(16):
        xi, yi = _sample_positions(sc.aircraft[0], mans[0], m * STEP, times)
        xj, yj = _sample_positions(sc.aircraft[1], mans[1], m * STEP, times)
        sim_conflict = np.hypot(xi - xj, yi - yj).min() < sc.d
        assert om.forbidden(0, m, 1, m) == sim_conflict
        bad.append(sim_conflict)
    # conflicts stop once both turn late enough
    assert bad[0] and not bad[-1]
    first_ok = bad.index(False)
    assert not any(bad[first_ok:])


def test_turning_before_conflict_start_is_allowed():
    # i keeps avoiding on a course that converges with j's recovered leg
    i = AircraftState(0, 0.0, 0.0, 0.0, 500.0, 200.0, 0.0)
    j = AircraftState(1, 100.0, 40.0, math.radians(270), 500.0, 100.0, -160.0)
    mans = [Maneuver(1.0, math.radians(10), True), Maneuver(1.0, math.radians(15), True)]
    sc = Scenario((i, j))
    om = build_omega_sets(sc, mans, 15, STEP)
    checked = 0
    for n in range(16):
        tau = om.tau_ar[(0, 1)][n]
        for m in range(n + 1, 16):
            if m * STEP <= tau:
                assert (m, n) not in om.forbidden_ar[(0, 1)]
                # simulate i on its avoidance ray against j's recovery leg between the two turns
                times = np.linspace(n * STEP, m * STEP, 2000)
                xi, yi = _sample_positions(i, mans[0], math.inf, times)
                xj, yj = _sample_positions(j, mans[1], n * STEP, times)
                assert np.hypot(xi - xj, yi - yj).min() >= sc.d - 1e-6
                checked += 1
            else:
                assert (m, n) in om.forbidden_ar[(0, 1)]
    assert checked > 0


def test_from_tables_validates_ordering():
    with pytest.raises(ValueError):
        OmegaSets.from_tables(2, 3, 0.1, ar={(0, 1): {(1, 2)}})
    with pytest.raises(ValueError):
        OmegaSets.from_tables(2, 3, 0.1, ra={(0, 1): {(2, 1)}})
    om = OmegaSets.from_tables(2, 3, 0.1, ar={(0, 1): {(2, 1)}})
    assert om.forbidden(0, 2, 1, 1) and om.forbidden(1, 1, 0, 2)


# ------------------------------------------------------------ solvers

def test_empty_tables_recover_immediately():
    om = OmegaSets.from_tables(4, 5, STEP)
    for sol in (solve_recovery_exact(om, [1, 2, 3, 4]), solve_recovery_greedy(om, [1, 2, 3, 4], [1, 2, 3, 4])):
        assert sol.periods == [0, 0, 0, 0] and sol.objective == 0.0


def test_single_forbidden_cell_delays_one_aircraft():
    om = OmegaSets.from_tables(2, 15, STEP, rr={(0, 1): {(0, 0)}})
    sol = solve_recovery_exact(om, [1.5, 1.5])
    assert sorted(sol.periods) == [0, 1]
    assert sol.objective == pytest.approx(1.5 * STEP ** 2)
    assert sol.alpha[(0, 1)] == (sol.periods[0] < sol.periods[1])


def random_omega(rng, n, periods, density):
    rr, ar, ra = {}, {}, {}
    for i in range(n):
        for j in range(i + 1, n):
            cells = [(m, k) for m in range(periods + 1) for k in range(periods + 1) if rng.random() < density]
            rr[(i, j)] = {c for c in cells if c[0] == c[1]}
            ar[(i, j)] = {c for c in cells if c[0] > c[1]}
            ra[(i, j)] = {c for c in cells if c[0] < c[1]}
    return OmegaSets.from_tables(n, periods, STEP, rr, ar, ra)


def test_exact_matches_enumeration_and_greedy_dominates():
    rng = np.random.default_rng(7)
    seen = 0
    for _ in range(150):
        n = int(rng.integers(2, 5))
        periods = int(rng.integers(1, 6))
        om = random_omega(rng, n, periods, rng.uniform(0.1, 0.6))
        a = list(rng.uniform(0.0, 3.0, n))
        ref = brute_recovery(om, a, periods, STEP)
        if ref is None:
            with pytest.raises(Infeasible):
                solve_recovery_exact(om, a)
            continue
        sol = solve_recovery_exact(om, a)
        assert is_compatible(om, sol.periods)
        assert sol.objective == pytest.approx(ref[0], rel=1e-12, abs=1e-15)
        try:
            greedy = solve_recovery_greedy(om, a, list(rng.uniform(0, 1, n)))
        except Infeasible:
            continue
        assert is_compatible(om, greedy.periods)
        assert greedy.objective >= sol.objective - 1e-15
        seen += 1
    assert seen > 30


def test_everything_forbidden_is_infeasible():
    full = {(m, k) for m in range(3) for k in range(3)}
    om = OmegaSets.from_tables(
        2, 2, STEP,
        rr={(0, 1): {c for c in full if c[0] == c[1]}},
        ar={(0, 1): {c for c in full if c[0] > c[1]}},
        ra={(0, 1): {c for c in full if c[0] < c[1]}},
    )
    with pytest.raises(Infeasible):
        solve_recovery_exact(om, [1.0, 1.0])
    with pytest.raises(Infeasible):
        solve_recovery_greedy(om, [1.0, 1.0], [1.0, 1.0])


def test_greedy_fixes_high_priority_first():
    om = OmegaSets.from_tables(2, 3, STEP, rr={(0, 1): {(0, 0)}})
    sol = solve_recovery_greedy(om, [1.0, 1.0], [0.1, 0.9])
    assert sol.periods == [1, 0]
