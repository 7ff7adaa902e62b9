"""Benchmark instances (circle / random circle problems), solver configuration and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from itertools import combinations
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateGeometry, ParseError, TooDense
from .geometry import AircraftState, ControlBounds, Maneuver, normalize_angle

DEFAULT_D = 5.0
CP_RADIUS = 100.0
CP_SPEED = 500.0
RCP_SPEED_RANGE = (450.0, 550.0)
RCP_JITTER = 100.0
RCP_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class Scenario:
    aircraft: tuple[AircraftState, ...]
    d: float = DEFAULT_D
    bounds: ControlBounds = field(default_factory=ControlBounds)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "aircraft", tuple(self.aircraft))
        if not self.d > 0.0:
            raise ValueError(f"separation norm must be positive, got {self.d}")
        ids = [a.id for a in self.aircraft]
        if len(set(ids)) != len(ids):
            raise ValueError(f"aircraft ids must be unique: {ids}")
        for i, j in combinations(self.aircraft, 2):
            dist = math.hypot(i.x0 - j.x0, i.y0 - j.y0)
            if dist < self.d:
                raise DegenerateGeometry(
                    f"aircraft {i.id!r} and {j.id!r} start {dist:.6g} NM apart, below d = {self.d} NM"
                )

    def __len__(self):
        return len(self.aircraft)

    @property
    def ids(self) -> list:
        return [a.id for a in self.aircraft]


@dataclass(frozen=True)
class SolverConfig:
    w: float = 0.5
    lambda_f: float = 1.0
    lambda_t: float = 0.25
    periods: int = 15
    step: float = 2.0 / 60.0
    threshold: float = 0.05
    relative_threshold: bool = True
    max_iter: int = 10
    time_limit: float = 300.0
    instance_time_limit: float = 900.0
    seed: int = 0
    starts: int = 16

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"w must lie in [0, 1], got {self.w}")
        if self.periods < 1:
            raise ValueError("periods must be >= 1")
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.lambda_f < 0.0 or self.lambda_t < 0.0:
            raise ValueError("cost weights must be non-negative")


# ------------------------------------------------------------ generators

def _snap_heading(rad: float) -> float:
    """Heading in [0, 2pi) that is the exact radian image of a float degree value.

    Keeps JSON round-trips (which store degrees) bit-exact.
    """
    return normalize_angle(math.radians(math.degrees(normalize_angle(rad))))


def _check_density(aircraft: Sequence[AircraftState], d: float) -> None:
    for i, j in combinations(aircraft, 2):
        if math.hypot(i.x0 - j.x0, i.y0 - j.y0) < d:
            raise TooDense(f"aircraft {i.id!r} and {j.id!r} closer than {d} NM")


def generate_cp(
    n: int,
    radius: float = CP_RADIUS,
    speed: float = CP_SPEED,
    d: float = DEFAULT_D,
    bounds: ControlBounds | None = None,
) -> Scenario:
    """Circle problem: ``n`` aircraft evenly spaced on a circle, all flying through the centre."""
    if n < 2:
        raise ValueError("a circle problem needs at least two aircraft")
    aircraft = []
    for k in range(n):
        ang = 2.0 * math.pi * k / n
        c, s = math.cos(ang), math.sin(ang)
        aircraft.append(
            AircraftState(
                id=k,
                x0=radius * c,
                y0=radius * s,
                heading0=_snap_heading(ang + math.pi),
                speed0=speed,
                target_x=-radius * c,
                target_y=-radius * s,
            )
        )
    _check_density(aircraft, d)
    return Scenario(tuple(aircraft), d, bounds or ControlBounds(), f"CP-{n}")


def generate_rcp(
    n: int,
    radius: float = CP_RADIUS,
    seed: int = 0,
    speed_range: tuple[float, float] = RCP_SPEED_RANGE,
    jitter: float = RCP_JITTER,
    d: float = DEFAULT_D,
    bounds: ControlBounds | None = None,
    min_spacing: float | None = None,
) -> Scenario:
    """Random circle problem; deterministic in ``seed``.

    Aircraft sit at random angles on the circle, at least ``min_spacing``
    (default ``2 * d``) apart, and head for a random point within ``jitter`` NM
    of the centre; targets lie ``2 * radius`` ahead.
    """
    if n < 2:
        raise ValueError("a random circle problem needs at least two aircraft")
    lo, hi = speed_range
    if not 0.0 < lo <= hi:
        raise ValueError(f"invalid speed range {speed_range}")
    spacing = 2.0 * d if min_spacing is None else min_spacing
    if spacing < d:
        raise ValueError("min_spacing cannot be below the separation norm")
    rng = np.random.default_rng(seed)
    pts = np.empty((n, 2))
    for k in range(n):
        for _ in range(RCP_MAX_ATTEMPTS):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            cand = (radius * math.cos(ang), radius * math.sin(ang))
            if k == 0 or np.hypot(*(pts[:k] - cand).T).min() >= spacing:
                pts[k] = cand
                break
        else:
            raise TooDense(f"could not place {n} aircraft {spacing} NM apart on a {radius} NM circle")
    aim_r = jitter * np.sqrt(rng.uniform(0.0, 1.0, n))
    aim_a = rng.uniform(0.0, 2.0 * math.pi, n)
    speeds = rng.uniform(lo, hi, n)
    aircraft = []
    for k in range(n):
        x0, y0 = float(pts[k, 0]), float(pts[k, 1])
        ax, ay = aim_r[k] * math.cos(aim_a[k]), aim_r[k] * math.sin(aim_a[k])
        heading = _snap_heading(math.atan2(ay - y0, ax - x0))
        aircraft.append(
            AircraftState(
                id=k,
                x0=x0,
                y0=y0,
                heading0=heading,
                speed0=float(speeds[k]),
                target_x=x0 + 2.0 * radius * math.cos(heading),
                target_y=y0 + 2.0 * radius * math.sin(heading),
            )
        )
    return Scenario(tuple(aircraft), d, bounds or ControlBounds(), f"RCP-{n}-{seed}")


# ------------------------------------------------------------------ I/O

def _deg(rad: float) -> float:
    """Degrees value that converts back to exactly ``rad`` when one exists nearby."""
    deg = math.degrees(rad)
    if math.radians(deg) == rad:
        return deg
    up = down = deg
    for _ in range(16):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        for cand in (up, down):
            if math.radians(cand) == rad:
                return cand
    return deg


def _field(obj: dict, key: str, where: str, path, kind=float):
    if key not in obj:
        raise ParseError(f"missing required field in {where}", path=path, field=key)
    val = obj[key]
    try:
        if kind is float:
            if isinstance(val, bool):
                raise TypeError
            return float(val)
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise TypeError
            return int(val)
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        return kind(val)
    except (TypeError, ValueError):
        raise ParseError(f"expected {kind.__name__} in {where}, got {val!r}", path=path, field=key) from None


def _load_json(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None


def scenario_to_dict(scenario: Scenario) -> dict:
    b = scenario.bounds
    return {
        "label": scenario.label,
        "d_nm": scenario.d,
        "q_lo": b.q_lo,
        "q_hi": b.q_hi,
        "theta_lo_deg": _deg(b.theta_lo),
        "theta_hi_deg": _deg(b.theta_hi),
        "aircraft": [
            {
                "id": a.id,
                "x_nm": a.x0,
                "y_nm": a.y0,
                "heading_deg": _deg(a.heading0),
                "speed_kn": a.speed0,
                "target_x_nm": a.target_x,
                "target_y_nm": a.target_y,
            }
            for a in scenario.aircraft
        ],
    }


def scenario_from_dict(data: Any, path=None) -> Scenario:
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", path=path)
    bounds = ControlBounds()
    try:
        bounds = ControlBounds(
            q_lo=float(data.get("q_lo", bounds.q_lo)),
            q_hi=float(data.get("q_hi", bounds.q_hi)),
            theta_lo=math.radians(float(data["theta_lo_deg"])) if "theta_lo_deg" in data else bounds.theta_lo,
            theta_hi=math.radians(float(data["theta_hi_deg"])) if "theta_hi_deg" in data else bounds.theta_hi,
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid control bounds: {exc}", path=path) from None
    if "aircraft" not in data or not isinstance(data["aircraft"], list):
        raise ParseError("missing aircraft list", path=path, field="aircraft")
    aircraft = []
    for k, row in enumerate(data["aircraft"]):
        where = f"aircraft[{k}]"
        if not isinstance(row, dict):
            raise ParseError(f"{where} must be an object", path=path)
        if "id" not in row:
            raise ParseError(f"missing required field in {where}", path=path, field="id")
        try:
            aircraft.append(
                AircraftState(
                    id=row["id"],
                    x0=_field(row, "x_nm", where, path),
                    y0=_field(row, "y_nm", where, path),
                    heading0=normalize_angle(math.radians(_field(row, "heading_deg", where, path))),
                    speed0=_field(row, "speed_kn", where, path),
                    target_x=_field(row, "target_x_nm", where, path),
                    target_y=_field(row, "target_y_nm", where, path),
                )
            )
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}", path=path) from None
    d = float(data.get("d_nm", DEFAULT_D))
    try:
        return Scenario(tuple(aircraft), d, bounds, str(data.get("label", "")))
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def write_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def read_scenario(path) -> Scenario:
    return scenario_from_dict(_load_json(path), path=path)


@dataclass
class SolutionRecord:
    """File-level view of a solved instance: per-aircraft decisions plus the cost ledger."""

    maneuvers: list[Maneuver]
    periods: list[int]
    step: float
    ids: list = field(default_factory=list)
    label: str = ""
    mode: str = "penalty"
    ledger: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def recovery_times(self) -> list[float]:
        return [m * self.step for m in self.periods]


def solution_to_dict(sol: SolutionRecord) -> dict:
    ids = sol.ids or list(range(len(sol.maneuvers)))
    return {
        "label": sol.label,
        "mode": sol.mode,
        "step_h": sol.step,
        "aircraft": [
            {
                "id": ident,
                "q": m.q,
                "theta_rad": m.theta,
                "controlled": m.controlled,
                "recovery_period": p,
                "recovery_time_h": p * sol.step,
            }
            for ident, m, p in zip(ids, sol.maneuvers, sol.periods)
        ],
        "ledger": sol.ledger,
        "meta": sol.meta,
    }


def solution_from_dict(data: Any, path=None) -> SolutionRecord:
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", path=path)
    step = _field(data, "step_h", "solution", path)
    if "aircraft" not in data or not isinstance(data["aircraft"], list):
        raise ParseError("missing aircraft list", path=path, field="aircraft")
    maneuvers, periods, ids = [], [], []
    for k, row in enumerate(data["aircraft"]):
        where = f"aircraft[{k}]"
        if not isinstance(row, dict):
            raise ParseError(f"{where} must be an object", path=path)
        try:
            maneuvers.append(
                Maneuver(
                    _field(row, "q", where, path),
                    _field(row, "theta_rad", where, path),
                    _field(row, "controlled", where, path, bool),
                )
            )
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}", path=path) from None
        periods.append(_field(row, "recovery_period", where, path, int))
        ids.append(row.get("id", k))
    return SolutionRecord(
        maneuvers=maneuvers,
        periods=periods,
        step=step,
        ids=ids,
        label=str(data.get("label", "")),
        mode=str(data.get("mode", "penalty")),
        ledger=dict(data.get("ledger", {})),
        meta=dict(data.get("meta", {})),
    )


def write_solution(sol: SolutionRecord, path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=2) + "\n")


def read_solution(path) -> SolutionRecord:
    return solution_from_dict(_load_json(path), path=path)


def config_to_dict(config: SolverConfig) -> dict:
    return asdict(config)
