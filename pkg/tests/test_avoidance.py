import itertools
import math

import numpy as np
import pytest

from conflict_recovery.avoidance import (
    avoidance_objective,
    deviation_cost,
    iter_control_sets,
    min_weight_vertex_cover,
    solve_avoidance,
    vertex_cover_lower_bound,
)
from conflict_recovery.errors import Infeasible, TimeLimit
from conflict_recovery.geometry import AircraftState, ControlBounds, Maneuver, initial_conflict_set
from conflict_recovery.oracle import pair_violations, simulate
from conflict_recovery.scenario import Scenario, SolverConfig, generate_cp, generate_rcp

from oracles import avoidance_oracle


def brute_covers(n, edges, weights):
    out = []
    for k in range(n + 1):
        for S in itertools.combinations(range(n), k):
            if all(a in S or b in S for a, b in edges):
                out.append((sum(weights[i] for i in S), S))
    return sorted(out)


def random_graph(rng, n):
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.4]
    weights = [float(w) for w in rng.choice([1.0, 1.0, 1.5, 2.25], n)]
    return edges, weights


def test_costs_by_hand():
    assert avoidance_objective([Maneuver.nominal()] * 3, 0.5, 1.0) == 0.0
    ms = [Maneuver(0.94, 0.0, True), Maneuver.nominal()]
    assert avoidance_objective(ms, 0.5, 1.0) == pytest.approx(1.0018)
    assert avoidance_objective(ms, 0.5, 1.0, [0.3, 7.0]) == pytest.approx(1.3018)
    assert deviation_cost(1.0, math.pi / 6, 0.5) == pytest.approx(0.5 * (math.pi / 6) ** 2)


def test_vertex_cover_bounds():
    assert vertex_cover_lower_bound([], 1.0) == 0.0
    assert vertex_cover_lower_bound([(0, 1)], 1.0, [0.0, 1.0]) == pytest.approx(1.0)
    for n in range(3, 9):
        clique = list(itertools.combinations(range(n), 2))
        assert vertex_cover_lower_bound(clique, 1.0, None, n) == pytest.approx(n - 1)


def test_min_weight_vertex_cover_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        edges, weights = random_graph(rng, n)
        cost, cover = min_weight_vertex_cover(n, edges, weights)
        assert cost == pytest.approx(brute_covers(n, edges, weights)[0][0])
        assert all(a in cover or b in cover for a, b in edges)


def test_control_sets_enumerated_in_cost_order():
    rng = np.random.default_rng(1)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        edges, weights = random_graph(rng, n)
        got = list(iter_control_sets(n, edges, weights))
        expected = brute_covers(n, edges, weights)
        assert sorted(S for _, S in got) == sorted(S for _, S in expected)
        costs = [c for c, _ in got]
        assert all(a <= b + 1e-12 for a, b in zip(costs, costs[1:]))
        for c, S in got:
            assert c == pytest.approx(sum(weights[i] for i in S))


def test_conflict_free_scenario_is_left_alone():
    a = AircraftState(0, 0.0, 0.0, 0.0, 500.0, 200.0, 0.0)
    b = AircraftState(1, 0.0, 20.0, 0.0, 500.0, 200.0, 20.0)
    sol = solve_avoidance(Scenario((a, b)), SolverConfig())
    assert sol.objective == 0.0 and sol.gap == 0.0
    assert all(m == Maneuver.nominal() for m in sol.maneuvers)


def test_head_on_pair_matches_oracle():
    sc = generate_cp(2)
    cfg = SolverConfig()
    sol = solve_avoidance(sc, cfg)
    assert len(sol.controlled) in (1, 2)
    assert not pair_violations(sc, sol.maneuvers)
    assert simulate(sc, sol.maneuvers).ok
    ref = avoidance_oracle(sc, cfg.w, cfg.lambda_f)
    assert sol.objective <= 1.05 * ref
    # the oracle samples, so it can only err upwards; the solver should not be far below it either
    assert sol.objective >= ref - 1e-3


def test_cp4_controls_three_aircraft():
    sc = generate_cp(4)
    sol = solve_avoidance(sc, SolverConfig())
    assert len(sol.controlled) == 3
    assert sol.objective == pytest.approx(3.0, abs=0.08)
    assert sol.gap <= 0.05
    assert all(m.within(sc.bounds) for m in sol.maneuvers)
    assert not pair_violations(sc, sol.maneuvers)


@pytest.mark.parametrize("seed", [0, 3, 5])
def test_rcp_solutions_are_conflict_free(seed):
    sc = generate_rcp(10, seed=seed)
    sol = solve_avoidance(sc, SolverConfig())
    assert not pair_violations(sc, sol.maneuvers)
    assert sol.lower_bound <= sol.objective + 1e-12
    assert 0.0 <= sol.gap <= 1.0
    # every conflicting pair has at least one controlled aircraft
    ctrl = set(sol.controlled)
    assert all(i in ctrl or j in ctrl for i, j in initial_conflict_set(sc))


def test_penalties_shift_control_away():
    sc = generate_cp(3)
    cfg = SolverConfig()
    base = solve_avoidance(sc, cfg)
    r = [0.0] * 3
    for k in base.controlled:
        r[k] = 5.0
    shifted = solve_avoidance(sc, cfg, r)
    free = [k for k in range(3) if k not in base.controlled]
    assert set(free) <= set(shifted.controlled)
    assert shifted.objective == pytest.approx(
        avoidance_objective(shifted.maneuvers, cfg.w, cfg.lambda_f, r)
    )


def test_warm_start_never_hurts():
    sc = generate_rcp(10, seed=1)
    cfg = SolverConfig(starts=2)
    first = solve_avoidance(sc, cfg)
    again = solve_avoidance(sc, cfg, warm_start=first.maneuvers)
    assert again.objective <= first.objective + 1e-9


def test_narrow_bounds_make_head_on_infeasible():
    a = AircraftState(0, -20.0, 0.0, 0.0, 500.0, 200.0, 0.0)
    b = AircraftState(1, 20.0, 0.0, math.pi, 500.0, -200.0, 0.0)
    sc = Scenario((a, b), bounds=ControlBounds(0.99, 1.01, -0.001, 0.001))
    with pytest.raises(Infeasible):
        solve_avoidance(sc, SolverConfig())


def test_exhausted_budget_returns_flagged_incumbent():
    sc = generate_rcp(10, seed=0)
    try:
        sol = solve_avoidance(sc, SolverConfig(), time_limit=0.0)
    except TimeLimit:
        return
    assert sol.status == "time_limit" and sol.time_limited
    assert not pair_violations(sc, sol.maneuvers)
