"""Planar separation geometry for pairs of aircraft flying straight rays.

Units throughout: NM for distance, knots for speed, hours for time, radians
for angles (measured counter-clockwise from the +x axis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import DegenerateGeometry, TangentGeometry

TWO_PI = 2.0 * math.pi
# below this squared relative speed (kn^2) the pair is treated as static
EPS_V = 1e-9


class _Degenerate:
    """Sentinel for an undefined closest-approach time (zero relative velocity)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGING_DEGENERATE"

    def __reduce__(self):
        return (_Degenerate, ())


DIVERGING_DEGENERATE = _Degenerate()


def normalize_angle(angle: float) -> float:
    """Wrap ``angle`` into [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@dataclass(frozen=True)
class AircraftState:
    id: object
    x0: float
    y0: float
    heading0: float
    speed0: float
    target_x: float
    target_y: float

    def __post_init__(self):
        if not self.speed0 > 0.0:
            raise ValueError(f"aircraft {self.id!r}: speed0 must be positive, got {self.speed0}")
        if not 0.0 <= self.heading0 < TWO_PI:
            raise ValueError(f"aircraft {self.id!r}: heading0 must lie in [0, 2pi), got {self.heading0}")
        if self.x0 == self.target_x and self.y0 == self.target_y:
            raise ValueError(f"aircraft {self.id!r}: target coincides with initial position")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x0, self.y0)

    @property
    def target(self) -> tuple[float, float]:
        return (self.target_x, self.target_y)


@dataclass(frozen=True)
class ControlBounds:
    q_lo: float = 0.94
    q_hi: float = 1.03
    theta_lo: float = -math.pi / 6.0
    theta_hi: float = math.pi / 6.0

    def __post_init__(self):
        if not (0.0 < self.q_lo <= 1.0 <= self.q_hi):
            raise ValueError(f"speed-ratio bounds must satisfy 0 < q_lo <= 1 <= q_hi, got [{self.q_lo}, {self.q_hi}]")
        if not (self.theta_lo <= 0.0 <= self.theta_hi):
            raise ValueError(
                f"heading bounds must satisfy theta_lo <= 0 <= theta_hi, got [{self.theta_lo}, {self.theta_hi}]"
            )
        if self.theta_hi - self.theta_lo >= TWO_PI:
            raise ValueError("heading deviation range must be narrower than a full turn")


@dataclass(frozen=True)
class Maneuver:
    q: float = 1.0
    theta: float = 0.0
    controlled: bool = False

    def __post_init__(self):
        if not self.controlled and (self.q != 1.0 or self.theta != 0.0):
            raise ValueError("an uncontrolled aircraft must keep q = 1 and theta = 0")

    @classmethod
    def nominal(cls) -> "Maneuver":
        return cls(1.0, 0.0, False)

    def within(self, bounds: ControlBounds, tol: float = 1e-12) -> bool:
        return (
            bounds.q_lo - tol <= self.q <= bounds.q_hi + tol
            and bounds.theta_lo - tol <= self.theta <= bounds.theta_hi + tol
        )


class SeparationMetrics(NamedTuple):
    t_min: object  # float hours, or DIVERGING_DEGENERATE
    g: float

    @property
    def degenerate(self) -> bool:
        return self.t_min is DIVERGING_DEGENERATE


class ConflictLines(NamedTuple):
    """Root lines of g = 0, each written as ``vx*gamma - vy*phi``.

    The conflict region is ``{vx*gamma_l - vy*phi_l >= 0 and vx*gamma_u - vy*phi_u <= 0}``.
    Coefficients are scaled so that ``(gamma, phi)`` has unit norm, which makes
    each line value a signed distance in knots.
    """

    gamma_l: float
    phi_l: float
    gamma_u: float
    phi_u: float

    def lower(self, vx, vy):
        return vx * self.gamma_l - vy * self.phi_l

    def upper(self, vx, vy):
        return vx * self.gamma_u - vy * self.phi_u


class VelocityBox(NamedTuple):
    vx_lo: float
    vx_hi: float
    vy_lo: float
    vy_hi: float

    def contains(self, vx: float, vy: float, tol: float = 1e-9) -> bool:
        return self.vx_lo - tol <= vx <= self.vx_hi + tol and self.vy_lo - tol <= vy <= self.vy_hi + tol

    def __neg__(self) -> "VelocityBox":
        return VelocityBox(-self.vx_hi, -self.vx_lo, -self.vy_hi, -self.vy_lo)


@dataclass(frozen=True)
class PairGeometry:
    dx: float
    dy: float
    vx: float
    vy: float
    lines: ConflictLines
    box: VelocityBox


# ---------------------------------------------------------------- motion

def velocity(state: AircraftState, maneuver: Maneuver | None = None) -> tuple[float, float]:
    m = maneuver or Maneuver.nominal()
    speed = m.q * state.speed0
    heading = state.heading0 + m.theta
    return speed * math.cos(heading), speed * math.sin(heading)


def position(state: AircraftState, maneuver: Maneuver | None, t: float) -> tuple[float, float]:
    vx, vy = velocity(state, maneuver)
    return state.x0 + vx * t, state.y0 + vy * t


def relative_velocity(i: AircraftState, j: AircraftState, mi: Maneuver, mj: Maneuver) -> tuple[float, float]:
    vix, viy = velocity(i, mi)
    vjx, vjy = velocity(j, mj)
    return vix - vjx, viy - vjy


# ----------------------------------------------------------- separation

def separation_metrics(dx: float, dy: float, vx: float, vy: float, d: float) -> SeparationMetrics:
    """Closest-approach time and the g-function of a pair.

    Raises DegenerateGeometry when the aircraft start closer than ``d``.
    """
    if dx * dx + dy * dy < d * d:
        raise DegenerateGeometry(f"initial distance {math.hypot(dx, dy):.6g} NM below separation norm {d} NM")
    v2 = vx * vx + vy * vy
    g = vy * vy * (dx * dx - d * d) + vx * vx * (dy * dy - d * d) - 2.0 * dx * dy * vx * vy
    if v2 < EPS_V:
        return SeparationMetrics(DIVERGING_DEGENERATE, g)
    return SeparationMetrics(-(dx * vx + dy * vy) / v2, g)


def is_separated(dx: float, dy: float, vx: float, vy: float, d: float) -> bool:
    m = separation_metrics(dx, dy, vx, vy, d)
    if m.degenerate:
        return True
    return m.g >= 0.0 or m.t_min <= 0.0


def separated_mask(dx, dy, vx, vy, d: float) -> np.ndarray:
    """Vectorised :func:`is_separated`; pairs starting inside ``d`` are reported as not separated."""
    dx, dy, vx, vy = (np.asarray(a, dtype=float) for a in (dx, dy, vx, vy))
    v2 = vx * vx + vy * vy
    g = vy * vy * (dx * dx - d * d) + vx * vx * (dy * dy - d * d) - 2.0 * dx * dy * vx * vy
    closing = dx * vx + dy * vy
    ok = (v2 < EPS_V) | (g >= 0.0) | (closing >= 0.0)
    return ok & (dx * dx + dy * dy >= d * d)


def separation_tolerance(dx: float, dy: float, vx: float, vy: float) -> float:
    """Relative band around g = 0 inside which classification is considered ambiguous."""
    return 1e-6 * max(1.0, abs(dx), abs(dy)) ** 2 * max(1.0, abs(vx), abs(vy)) ** 2


def min_distance_on_ray(dx: float, dy: float, vx: float, vy: float) -> float:
    """Exact minimum of |p + v t| for t >= 0."""
    v2 = vx * vx + vy * vy
    if v2 < EPS_V:
        return math.hypot(dx, dy)
    t = max(0.0, -(dx * vx + dy * vy) / v2)
    return math.hypot(dx + vx * t, dy + vy * t)


# -------------------------------------------------------- conflict region

def _root_directions(dx: float, dy: float, d: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Unit directions of the two root lines of g = 0."""
    rho = math.hypot(dx, dy)
    alpha = math.asin(d / rho)
    bx, by = -dx / rho, -dy / rho
    out = []
    for s in (1.0, -1.0):
        c, sn = math.cos(s * alpha), math.sin(s * alpha)
        out.append((c * bx - sn * by, sn * bx + c * by))
    return out[0], out[1]


def conflict_region_lines(dx: float, dy: float, d: float) -> ConflictLines:
    """Coefficients of the conflict region boundary, oriented by probing.

    The lower line is the one whose conflict-side ray falls in the half-plane
    ``vy*dx - vx*dy <= 0``; this makes the two branches of
    :func:`disjunctive_check` cover exactly the separated relative velocities.
    """
    if dx * dx + dy * dy <= d * d:
        raise TangentGeometry(f"initial distance {math.hypot(dx, dy):.6g} NM does not exceed d = {d} NM")
    lines = []
    for ux, uy in _root_directions(dx, dy, d):
        # line through the origin along u, written vx*gamma - vy*phi = 0
        lines.append([-uy, -ux])
    # probe: the head-on relative velocity -p lies strictly inside C
    px, py = -dx, -dy
    for ln in lines:
        if px * ln[0] - py * ln[1] < 0.0:
            ln[0], ln[1] = -ln[0], -ln[1]
    # the C-bounding ray of each line is the one on the positive side of the other line
    rays = []
    for k, ln in enumerate(lines):
        other = lines[1 - k]
        rx, ry = ln[1], ln[0]  # direction along vx*g - vy*p = 0
        if rx * other[0] - ry * other[1] < 0.0:
            rx, ry = -rx, -ry
        rays.append((rx, ry))
    n0 = rays[0][1] * dx - rays[0][0] * dy
    lo, up = (0, 1) if n0 <= 0.0 else (1, 0)
    gl, pl = lines[lo]
    gu, pu = lines[up]
    return ConflictLines(gl, pl, -gu, -pu)


def root_line_coefficients(dx: float, dy: float, d: float) -> list[tuple[float, float]]:
    """Unscaled root-line coefficients ``(a, b)`` of ``a*vx - b*vy = 0`` from the closed-form quadratic roots.

    Uses the pair of forms with the better-conditioned leading coefficient.
    """
    disc = dx * dx + dy * dy - d * d
    if disc <= 0.0:
        raise TangentGeometry("discriminant vanishes")
    s = d * math.sqrt(disc)
    if abs(dy * dy - d * d) >= abs(dx * dx - d * d):
        a = dy * dy - d * d
        return [(a, dx * dy + s), (a, dx * dy - s)]
    a = dx * dx - d * d
    # (dx^2 - d^2) vy - (dx dy +- s) vx = 0  ->  vx*(-(dx dy +- s)) - vy*(-(dx^2 - d^2)) = 0
    return [(-(dx * dy + s), -a), (-(dx * dy - s), -a)]


def in_conflict_region(vx: float, vy: float, lines: ConflictLines) -> bool:
    return lines.lower(vx, vy) >= 0.0 and lines.upper(vx, vy) <= 0.0


def normal_line(dx: float, dy: float, vx, vy):
    """Value of the line through the origin parallel to the initial relative position."""
    return vy * dx - vx * dy


def disjunctive_check(dx: float, dy: float, vx: float, vy: float, lines: ConflictLines, z: bool) -> bool:
    """Evaluate one branch of the linear disjunction; some branch holds iff the pair is separated."""
    n = normal_line(dx, dy, vx, vy)
    if z:
        return n <= 0.0 and lines.lower(vx, vy) <= 0.0
    return n >= 0.0 and lines.upper(vx, vy) >= 0.0


# ------------------------------------------------------ relative velocity box

def _cos_range(lo: float, hi: float) -> tuple[float, float]:
    """Exact range of cos over the closed angle interval [lo, hi]."""
    vals = [math.cos(lo), math.cos(hi)]
    k = math.ceil(lo / math.pi)
    while k * math.pi <= hi:
        vals.append(1.0 if k % 2 == 0 else -1.0)
        k += 1
    return min(vals), max(vals)


def _component_range(speed: float, heading: float, bounds: ControlBounds, phase: float) -> tuple[float, float]:
    c_lo, c_hi = _cos_range(heading + bounds.theta_lo - phase, heading + bounds.theta_hi - phase)
    lo = speed * min(bounds.q_lo * c_lo, bounds.q_hi * c_lo)
    hi = speed * max(bounds.q_lo * c_hi, bounds.q_hi * c_hi)
    return lo, hi


def velocity_range(state: AircraftState, bounds: ControlBounds) -> VelocityBox:
    x_lo, x_hi = _component_range(state.speed0, state.heading0, bounds, 0.0)
    # sin(a) = cos(a - pi/2)
    y_lo, y_hi = _component_range(state.speed0, state.heading0, bounds, math.pi / 2.0)
    return VelocityBox(x_lo, x_hi, y_lo, y_hi)


def relative_velocity_box(i: AircraftState, j: AircraftState, bounds: ControlBounds) -> VelocityBox:
    """Interval bounds on the relative velocity over all in-bounds maneuvers of both aircraft."""
    bi = velocity_range(i, bounds)
    bj = velocity_range(j, bounds)
    return VelocityBox(bi.vx_lo - bj.vx_hi, bi.vx_hi - bj.vx_lo, bi.vy_lo - bj.vy_hi, bi.vy_hi - bj.vy_lo)


def box_may_conflict(dx: float, dy: float, box: VelocityBox, lines: ConflictLines) -> bool:
    """False only when the box provably misses the conflict region."""
    corners = [(box.vx_lo, box.vy_lo), (box.vx_lo, box.vy_hi), (box.vx_hi, box.vy_lo), (box.vx_hi, box.vy_hi)]
    if max(lines.lower(x, y) for x, y in corners) < 0.0:
        return False
    if min(lines.upper(x, y) for x, y in corners) > 0.0:
        return False
    if min(dx * x + dy * y for x, y in corners) >= 0.0:
        return False
    return True


def pair_geometry(
    i: AircraftState, j: AircraftState, mi: Maneuver, mj: Maneuver, bounds: ControlBounds, d: float
) -> PairGeometry:
    dx, dy = i.x0 - j.x0, i.y0 - j.y0
    vx, vy = relative_velocity(i, j, mi, mj)
    return PairGeometry(dx, dy, vx, vy, conflict_region_lines(dx, dy, d), relative_velocity_box(i, j, bounds))


def initial_conflict_set(scenario) -> set[tuple[int, int]]:
    """Index pairs ``(i, j)``, ``i < j``, in conflict when every aircraft flies its nominal ray."""
    aircraft = list(scenario.aircraft)
    d = scenario.d
    nominal = Maneuver.nominal()
    out = set()
    for a, b in combinations(range(len(aircraft)), 2):
        i, j = aircraft[a], aircraft[b]
        dx, dy = i.x0 - j.x0, i.y0 - j.y0
        vx, vy = relative_velocity(i, j, nominal, nominal)
        if not is_separated(dx, dy, vx, vy, d):
            out.add((a, b))
    return out

