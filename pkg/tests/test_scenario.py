import json
import math

import numpy as np
import pytest

from conflict_recovery.errors import DegenerateGeometry, ParseError, TooDense
from conflict_recovery.geometry import AircraftState, Maneuver, initial_conflict_set
from conflict_recovery.scenario import (
    Scenario,
    SolutionRecord,
    SolverConfig,
    config_to_dict,
    generate_cp,
    generate_rcp,
    read_scenario,
    read_solution,
    scenario_to_dict,
    write_scenario,
    write_solution,
)


def test_cp4_layout():
    sc = generate_cp(4, radius=100.0, speed=500.0)
    expected = [(100, 0), (0, 100), (-100, 0), (0, -100)]
    for a, (x, y) in zip(sc.aircraft, expected):
        assert (a.x0, a.y0) == pytest.approx((x, y), abs=1e-9)
        assert (a.target_x, a.target_y) == pytest.approx((-x, -y), abs=1e-9)
        # heading points at the centre
        assert math.cos(a.heading0) * -x + math.sin(a.heading0) * -y == pytest.approx(100.0)
        assert a.speed0 == 500.0
    assert len(initial_conflict_set(sc)) == 6
    assert sc.label == "CP-4"


def test_cp2_is_a_head_on_pair():
    assert initial_conflict_set(generate_cp(2)) == {(0, 1)}


def test_cp_too_dense():
    with pytest.raises(TooDense):
        generate_cp(200, radius=100.0)


def test_rcp_is_deterministic_in_seed():
    assert generate_rcp(10, seed=3) == generate_rcp(10, seed=3)
    assert generate_rcp(10, seed=3) != generate_rcp(10, seed=4)


def test_rcp_respects_spacing_speeds_and_target_distance():
    for seed in range(20):
        sc = generate_rcp(20, seed=seed)
        pts = np.array([[a.x0, a.y0] for a in sc.aircraft])
        gaps = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
        assert gaps[np.triu_indices(20, 1)].min() >= 2 * sc.d
        for a in sc.aircraft:
            assert 450.0 <= a.speed0 <= 550.0
            assert math.hypot(a.x0, a.y0) == pytest.approx(100.0)
            assert math.hypot(a.target_x - a.x0, a.target_y - a.y0) == pytest.approx(200.0)


def test_rcp_without_jitter_reduces_to_a_circle_problem():
    sc = generate_rcp(6, seed=1, jitter=0.0, speed_range=(500.0, 500.0))
    for a in sc.aircraft:
        assert (a.target_x, a.target_y) == pytest.approx((-a.x0, -a.y0), abs=1e-9)
        assert a.speed0 == 500.0
    assert len(initial_conflict_set(sc)) == 15


def test_rcp10_mean_conflicts_in_band():
    mean = np.mean([len(initial_conflict_set(generate_rcp(10, seed=s))) for s in range(100)])
    assert 1.0 <= mean <= 6.0


def test_rcp_rejects_spacing_below_norm():
    with pytest.raises(ValueError):
        generate_rcp(5, min_spacing=2.0)
    with pytest.raises(TooDense):
        generate_rcp(80, radius=50.0)


def test_scenario_rejects_pairs_inside_norm():
    a = AircraftState(0, 0.0, 0.0, 0.0, 500.0, 100.0, 0.0)
    b = AircraftState(1, 3.0, 0.0, 0.0, 500.0, 103.0, 0.0)
    with pytest.raises(DegenerateGeometry):
        Scenario((a, b))


def test_scenario_round_trip(tmp_path):
    for sc in (generate_cp(7), generate_rcp(12, seed=5)):
        path = tmp_path / "s.json"
        write_scenario(sc, path)
        assert read_scenario(path) == sc


def test_missing_field_names_it(tmp_path):
    data = scenario_to_dict(generate_cp(3))
    del data["aircraft"][1]["speed_kn"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ParseError) as err:
        read_scenario(path)
    assert err.value.field == "speed_kn"
    assert "speed_kn" in str(err.value)


def test_wrong_type_and_bad_json(tmp_path):
    data = scenario_to_dict(generate_cp(3))
    data["aircraft"][0]["x_nm"] = "east"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ParseError) as err:
        read_scenario(path)
    assert err.value.field == "x_nm"
    path.write_text('{"aircraft": [\n  {"id": 0,,}\n]}')
    with pytest.raises(ParseError) as err:
        read_scenario(path)
    assert err.value.line == 2


def test_separation_defaults_to_five(tmp_path):
    data = scenario_to_dict(generate_cp(3))
    del data["d_nm"]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    assert read_scenario(path).d == 5.0


def test_solution_round_trip(tmp_path):
    rec = SolutionRecord(
        maneuvers=[Maneuver(0.97, -0.1, True), Maneuver.nominal()],
        periods=[3, 0],
        step=2 / 60,
        ids=["a", "b"],
        label="x",
        mode="exact-naive",
        ledger={"tc": [1.0, 0.0]},
        meta={"avoidance_status": "optimal"},
    )
    path = tmp_path / "sol.json"
    write_solution(rec, path)
    back = read_solution(path)
    assert back == rec
    assert back.recovery_times == pytest.approx([0.1, 0.0])


def test_solution_missing_period(tmp_path):
    path = tmp_path / "sol.json"
    path.write_text(json.dumps({"step_h": 0.1, "aircraft": [{"q": 1.0, "theta_rad": 0.0, "controlled": False}]}))
    with pytest.raises(ParseError) as err:
        read_solution(path)
    assert err.value.field == "recovery_period"


def test_config_validation_and_defaults():
    cfg = SolverConfig()
    assert (cfg.w, cfg.lambda_f, cfg.lambda_t, cfg.periods) == (0.5, 1.0, 0.25, 15)
    assert cfg.step == pytest.approx(2 / 60)
    assert config_to_dict(cfg)["time_limit"] == 300.0
    with pytest.raises(ValueError):
        SolverConfig(w=1.5)
    with pytest.raises(ValueError):
        SolverConfig(periods=0)
