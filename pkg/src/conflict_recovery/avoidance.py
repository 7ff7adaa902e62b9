"""Conflict avoidance: choose which aircraft to control and their speed/heading changes.

The mixed-integer model is solved by branch-and-bound over the set of
controlled aircraft.  Control sets are enumerated in nondecreasing fixed cost
(only vertex covers of the initial conflict graph qualify), and for each set
the continuous speed/heading subproblem is solved by multistart local descent
where every pair is pinned to one side of its conflict cone.  Candidates are
accepted only after an exact separation check of every pair.
"""
from __future__ import annotations

import heapq
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import Infeasible, TimeLimit
from .geometry import (
    Maneuver,
    box_may_conflict,
    conflict_region_lines,
    disjunctive_check,
    initial_conflict_set,
    relative_velocity,
    relative_velocity_box,
    separated_mask,
)
from .scenario import Scenario, SolverConfig


def minimize(*args, **kwargs):
    # SLSQP clips trial steps to the box and warns each time; the iterates are clipped anyway
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
        return _scipy_minimize(*args, **kwargs)

log = logging.getLogger(__name__)

# slack kept between the relative velocity and the conflict cone, as a fraction of speed scale
SIDE_MARGIN = 1e-7
# pairs with more scaled slack than this start outside the local model and join only if violated
WORKING_SLACK = 0.05
# local descents per control set while building the first incumbent
INCUMBENT_STARTS = 4


@dataclass
class AvoidanceSolution:
    maneuvers: list[Maneuver]
    z: dict[tuple[int, int], bool]
    objective: float
    lower_bound: float
    gap: float
    runtime: float
    status: str = "optimal"  # or "time_limit"
    sets_explored: int = 0
    penalties: list[float] = field(default_factory=list)

    @property
    def controlled(self) -> list[int]:
        return [k for k, m in enumerate(self.maneuvers) if m.controlled]

    @property
    def time_limited(self) -> bool:
        return self.status == "time_limit"


def deviation_cost(q: float, theta: float, w: float) -> float:
    return w * theta * theta + (1.0 - w) * (1.0 - q) ** 2


def avoidance_objective(maneuvers: Sequence[Maneuver], w: float, lambda_f: float, r: Sequence[float] | None = None) -> float:
    """Weighted deviation plus per-aircraft control cost, with projected recovery penalties."""
    if r is None:
        r = [0.0] * len(maneuvers)
    if any(x < 0.0 for x in r):
        raise ValueError("recovery penalties must be non-negative")
    total = 0.0
    for m, ri in zip(maneuvers, r):
        total += deviation_cost(m.q, m.theta, w)
        if m.controlled:
            total += lambda_f + ri
    return total


# --------------------------------------------------------- vertex covers

def _adjacency(n: int, edges) -> list[set[int]]:
    adj = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _matching_bound(edges, weights, allowed) -> float:
    """Sum of min endpoint weights over a greedy matching of edges inside ``allowed``."""
    used = set()
    total = 0.0
    for a, b in edges:
        if a in allowed and b in allowed and a not in used and b not in used:
            used.add(a)
            used.add(b)
            total += min(weights[a], weights[b])
    return total


def min_weight_vertex_cover(n: int, edges, weights: Sequence[float]) -> tuple[float, frozenset[int]]:
    """Exact minimum-weight vertex cover by depth-first branch-and-bound."""
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
    best = [math.inf, frozenset()]

    def rec(rest: list, chosen: frozenset, cost: float) -> None:
        if not rest:
            if cost < best[0] - 1e-12:
                best[0], best[1] = cost, chosen
            return
        free = {v for e in rest for v in e}
        if cost + _matching_bound(rest, weights, free) >= best[0] - 1e-12:
            return
        deg: dict[int, int] = {}
        for a, b in rest:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        v = max(sorted(deg), key=lambda u: deg[u])
        # either v is in the cover, or all of its uncovered neighbours are
        rec([e for e in rest if v not in e], chosen | {v}, cost + weights[v])
        nbrs = {a if b == v else b for a, b in rest if v in (a, b)}
        rec([e for e in rest if not (set(e) & nbrs)], chosen | nbrs, cost + sum(weights[u] for u in nbrs))

    rec(edges, frozenset(), 0.0)
    return best[0], best[1]


def vertex_cover_lower_bound(P0, lambda_f: float, r: Sequence[float] | None = None, n: int | None = None) -> float:
    """Weighted minimum vertex cover of the initial conflict graph (vertex weight lambda_f + r_i)."""
    P0 = list(P0)
    if not P0:
        return 0.0
    if n is None:
        n = 1 + max(max(e) for e in P0)
    if r is None:
        r = [0.0] * n
    weights = [lambda_f + r[k] for k in range(n)]
    return min_weight_vertex_cover(n, P0, weights)[0]


def iter_control_sets(n: int, edges, weights: Sequence[float]) -> Iterator[tuple[float, tuple[int, ...]]]:
    """Yield every vertex cover as ``(cost, sorted members)`` in nondecreasing cost.

    Best-first search over include/exclude decisions in index order; equal-cost
    sets come out in lexicographic order of their member tuples.
    """
    edges = sorted({(min(a, b), max(a, b)) for a, b in edges})
    adj = _adjacency(n, edges)
    weights = list(weights)

    def bound(k: int, included: tuple, excluded: frozenset, cost: float) -> float:
        forced = {u for v in excluded for u in adj[v] if u >= k}
        rest = set(range(k, n)) - forced
        inner = [(a, b) for a, b in edges if a in rest and b in rest]
        return cost + sum(weights[u] for u in forced) + _matching_bound(inner, weights, rest)

    def key(b: float, complete: bool, included: tuple):
        return (round(b, 12), 1 if complete else 0, included)

    heap = [(key(bound(0, (), frozenset(), 0.0), n == 0, ()), 0, (), frozenset(), 0.0)]
    while heap:
        (kb, complete, _), k, included, excluded, cost = heapq.heappop(heap)
        if k == n:
            yield cost, included
            continue
        forced = any(u in excluded for u in adj[k])
        children = [(included + (k,), excluded, cost + weights[k])]
        if not forced:
            children.append((included, excluded | {k}, cost))
        for inc, exc, c in children:
            b = bound(k + 1, inc, exc, c)
            heapq.heappush(heap, (key(b, k + 1 == n, inc), k + 1, inc, exc, c))


# ----------------------------------------------------- continuous subproblem

class _PairData:
    """Per-pair constants shared by every control set."""

    def __init__(self, scenario: Scenario):
        ac = scenario.aircraft
        n = len(ac)
        self.n = n
        self.speed = np.array([a.speed0 for a in ac])
        self.heading = np.array([a.heading0 for a in ac])
        self.scale = float(self.speed.max()) if n else 1.0
        pairs = list(combinations(range(n), 2))
        self.pairs = pairs
        self.I = np.array([p[0] for p in pairs], dtype=int)
        self.J = np.array([p[1] for p in pairs], dtype=int)
        self.dx = np.array([ac[i].x0 - ac[j].x0 for i, j in pairs])
        self.dy = np.array([ac[i].y0 - ac[j].y0 for i, j in pairs])
        lines = [conflict_region_lines(ac[i].x0 - ac[j].x0, ac[i].y0 - ac[j].y0, scenario.d) for i, j in pairs]
        self.lines = lines
        # outward normals: side "l" needs L_l <= 0, side "u" needs L_u >= 0
        self.n_l = np.array([[-ln.gamma_l, ln.phi_l] for ln in lines]).reshape(-1, 2)
        self.n_u = np.array([[ln.gamma_u, -ln.phi_u] for ln in lines]).reshape(-1, 2)
        self.reachable = np.array(
            [
                box_may_conflict(
                    ac[i].x0 - ac[j].x0,
                    ac[i].y0 - ac[j].y0,
                    relative_velocity_box(ac[i], ac[j], scenario.bounds),
                    ln,
                )
                for (i, j), ln in zip(pairs, lines)
            ],
            dtype=bool,
        )

    def velocities(self, q: np.ndarray, th: np.ndarray) -> np.ndarray:
        ang = self.heading + th
        s = q * self.speed
        return np.column_stack([s * np.cos(ang), s * np.sin(ang)])


class _Subproblem:
    def __init__(self, data: _PairData, S: tuple[int, ...], scenario: Scenario, w: float):
        self.data = data
        self.S = np.array(S, dtype=int)
        self.w = w
        self.bounds = scenario.bounds
        self.d = scenario.d
        in_s = np.zeros(data.n, dtype=bool)
        in_s[self.S] = True
        self.in_s = in_s
        self.pos = -np.ones(data.n, dtype=int)
        self.pos[self.S] = np.arange(len(S))
        self.active = np.nonzero((in_s[data.I] | in_s[data.J]) & data.reachable)[0]

    def expand(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = len(self.S)
        q = np.ones(self.data.n)
        th = np.zeros(self.data.n)
        q[self.S] = x[:k]
        th[self.S] = x[k:]
        return q, th

    def objective(self, x):
        k = len(self.S)
        q, th = x[:k], x[k:]
        f = self.w * np.dot(th, th) + (1.0 - self.w) * np.dot(1.0 - q, 1.0 - q)
        g = np.concatenate([-2.0 * (1.0 - self.w) * (1.0 - q), 2.0 * self.w * th])
        return f, g

    def rel_velocity(self, x, rows=None):
        rows = self.active if rows is None else rows
        q, th = self.expand(x)
        v = self.data.velocities(q, th)
        return v[self.data.I[rows]] - v[self.data.J[rows]]

    def slacks(self, x, rows=None):
        """Scaled distance of each relative velocity past the lower and upper boundary lines."""
        rows = self.active if rows is None else rows
        rv = self.rel_velocity(x, rows)
        slack_l = np.einsum("ij,ij->i", self.data.n_l[rows], rv) / self.data.scale
        slack_u = np.einsum("ij,ij->i", self.data.n_u[rows], rv) / self.data.scale
        return slack_l, slack_u

    def choose_sides(self, x) -> np.ndarray:
        """Per active pair, 0 for the lower line and 1 for the upper line, picking the nearer feasible side."""
        slack_l, slack_u = self.slacks(x)
        return (slack_u > slack_l).astype(int)

    def constraint_normals(self, sides, rows=None):
        rows = self.active if rows is None else rows
        return np.where(sides[:, None] == 0, self.data.n_l[rows], self.data.n_u[rows])

    def constraints(self, x, normals, rows=None):
        rv = self.rel_velocity(x, rows)
        return np.einsum("ij,ij->i", normals, rv) / self.data.scale - SIDE_MARGIN

    def jacobian(self, x, normals, rows=None):
        rows = self.active if rows is None else rows
        k = len(self.S)
        q, th = self.expand(x)
        data = self.data
        ang = data.heading + th
        c, s = np.cos(ang), np.sin(ang)
        dq = np.column_stack([data.speed * c, data.speed * s])  # dv/dq per aircraft
        dth = np.column_stack([-q * data.speed * s, q * data.speed * c])
        jac = np.zeros((len(rows), 2 * k))
        idx_rows = np.arange(len(rows))
        for idx, sign in ((data.I[rows], 1.0), (data.J[rows], -1.0)):
            col = self.pos[idx]
            mask = col >= 0
            r, cidx = idx_rows[mask], col[mask]
            jac[r, cidx] += sign * np.einsum("ij,ij->i", normals[mask], dq[idx[mask]])
            jac[r, k + cidx] += sign * np.einsum("ij,ij->i", normals[mask], dth[idx[mask]])
        return jac / data.scale

    def var_bounds(self):
        k = len(self.S)
        b = self.bounds
        return [(b.q_lo, b.q_hi)] * k + [(b.theta_lo, b.theta_hi)] * k

    def clip(self, x):
        k = len(self.S)
        b = self.bounds
        out = np.array(x, dtype=float)
        out[:k] = np.clip(out[:k], b.q_lo, b.q_hi)
        out[k:] = np.clip(out[k:], b.theta_lo, b.theta_hi)
        return out

    def certified(self, x) -> bool:
        """Exact check of every pair, including pairs not in the local model."""
        q, th = self.expand(x)
        v = self.data.velocities(q, th)
        rv = v[self.data.I] - v[self.data.J]
        return bool(np.all(separated_mask(self.data.dx, self.data.dy, rv[:, 0], rv[:, 1], self.d)))

    def _slsqp(self, x0, sides):
        """SLSQP on a working set of nearly active pairs, grown until no pinned side is violated."""
        normals_all = self.constraint_normals(sides)
        slack = self.constraints(x0, normals_all)
        work = slack < WORKING_SLACK
        x = np.asarray(x0, dtype=float)
        for _ in range(20):
            rows = self.active[work]
            if len(rows) == 0:
                return self.clip(x)
            normals = normals_all[work]
            res = minimize(
                self.objective,
                x,
                jac=True,
                method="SLSQP",
                bounds=self.var_bounds(),
                constraints=[{"type": "ineq", "fun": self.constraints, "jac": self.jacobian, "args": (normals, rows)}],
                options={"maxiter": 300, "ftol": 1e-10},
            )
            x = self.clip(res.x)
            late = (self.constraints(x, normals_all) < -1e-9) & ~work
            if not late.any():
                break
            work |= late
        return x

    def penetration(self, x, weight: float = 0.0):
        """Squared depth of every active relative velocity inside its conflict cone, plus ``weight`` times the deviation."""
        k = len(self.S)
        q, th = self.expand(x)
        data = self.data
        a = self.active
        v = data.velocities(q, th)
        rv = v[data.I[a]] - v[data.J[a]]
        margin = 10.0 * SIDE_MARGIN * data.scale
        # depth past each boundary line; the cone interior is where both are positive
        in_l = -np.einsum("ij,ij->i", data.n_l[a], rv) + margin
        in_u = -np.einsum("ij,ij->i", data.n_u[a], rv) + margin
        use_l = in_l <= in_u
        depth = np.where(use_l, in_l, in_u)
        hit = depth > 0.0
        normals = np.where(use_l[:, None], -data.n_l[a], -data.n_u[a])
        val = float(np.sum(depth[hit] ** 2)) / data.scale**2
        # gradient of depth equals the (negated) boundary normal pushed through dv/dx
        jac = self.jacobian(x, normals) * data.scale
        grad = 2.0 * (depth * hit) @ jac / data.scale**2
        if weight:
            f, g = self.objective(x)
            val += weight * f
            grad = grad + weight * g
        return val, grad

    def restore(self, x0) -> np.ndarray:
        res = minimize(self.penetration, x0, jac=True, method="L-BFGS-B", bounds=self.var_bounds(), options={"maxiter": 500})
        return self.clip(res.x)

    def local_solve(self, x0, rounds: int = 3) -> list[np.ndarray]:
        """Candidate points from one start, best first when all certify.

        Descent runs with pair sides pinned at the start and re-picked if the
        result is not certified.  When that fails, the start is pushed out of
        every conflict cone by a penetration descent, and the restored point
        is polished with sides pinned there.
        """
        if len(self.active) == 0:
            return [np.concatenate([np.ones(len(self.S)), np.zeros(len(self.S))])]
        x = np.asarray(x0, dtype=float)
        seen = set()
        for _ in range(rounds):
            sides = self.choose_sides(x)
            key = sides.tobytes()
            if key in seen:
                break
            seen.add(key)
            x = self._slsqp(x, sides)
            if not np.all(np.isfinite(x)):
                break
            if self.certified(x):
                return [x]
        out = []
        y = self.restore(x0)
        for _ in range(2):
            out.append(y)
            y = self._slsqp(y, self.choose_sides(y))
            if self.certified(y):
                out.insert(0, y)
                break
        return out


class _EscapeScreen:
    """Cheap screen for control sets where one controlled aircraft is boxed in.

    For aircraft ``j`` and a nominal neighbour ``o`` the separated cells of a
    fixed (q, theta) grid are cached.  If no cell separates ``j`` from all of
    its uncontrolled neighbours at once, the set is skipped and a minimal
    blocking subset is remembered as a clause: ``j`` controlled requires one
    member of the subset controlled too.
    """

    def __init__(self, data: _PairData, scenario: Scenario, resolution: int = 61):
        b = scenario.bounds
        qq, tt = np.meshgrid(np.linspace(b.q_lo, b.q_hi, resolution), np.linspace(b.theta_lo, b.theta_hi, resolution))
        self.q = qq.ravel()
        self.th = tt.ravel()
        self.data = data
        self.d = scenario.d
        self.index = {p: k for k, p in enumerate(data.pairs)}
        self.cache: dict[tuple[int, int], np.ndarray] = {}
        self.clauses: list[tuple[int, frozenset[int]]] = []

    def mask(self, j: int, o: int) -> np.ndarray:
        key = (j, o)
        if key not in self.cache:
            data = self.data
            ang = data.heading[j] + self.th
            s = self.q * data.speed[j]
            ho, so = data.heading[o], data.speed[o]
            vx = s * np.cos(ang) - so * math.cos(ho)
            vy = s * np.sin(ang) - so * math.sin(ho)
            k = self.index[(min(j, o), max(j, o))]
            sign = 1.0 if j < o else -1.0
            dx = np.full_like(vx, sign * data.dx[k])
            dy = np.full_like(vy, sign * data.dy[k])
            self.cache[key] = separated_mask(dx, dy, vx, vy, self.d)
        return self.cache[key]

    def violates(self, S: frozenset[int]) -> bool:
        return any(j in S and not (U & S) for j, U in self.clauses)

    def screen(self, S: tuple[int, ...]) -> bool:
        """True if the set passes; otherwise learns a clause and returns False."""
        members = frozenset(S)
        if self.violates(members):
            return False
        data = self.data
        for j in S:
            nbrs = [
                o for o in range(data.n)
                if o not in members and data.reachable[self.index[(min(j, o), max(j, o))]]
            ]
            if not nbrs:
                continue
            joint = np.logical_and.reduce([self.mask(j, o) for o in nbrs])
            if joint.any():
                continue
            blocking = list(nbrs)
            for o in list(nbrs):
                trial = [u for u in blocking if u != o]
                if trial and not np.logical_and.reduce([self.mask(j, u) for u in trial]).any():
                    blocking = trial
            self.clauses.append((j, frozenset(blocking)))
            log.debug("aircraft %d boxed in by %s", j, sorted(blocking))
            return False
        return True


    def seeds(self, S: tuple[int, ...], w: float) -> list[np.ndarray]:
        """Starts built from the cheapest grid cells clear of the uncontrolled aircraft.

        One start takes each member's cheapest cell overall, two more restrict
        every member to a left or a right turn.
        """
        members = frozenset(S)
        dev = w * self.th ** 2 + (1.0 - w) * (1.0 - self.q) ** 2
        picks = []
        for j in S:
            nbrs = [o for o in range(self.data.n) if o not in members]
            ok = np.logical_and.reduce([self.mask(j, o) for o in nbrs]) if nbrs else np.ones_like(dev, dtype=bool)
            row = []
            for side in (None, 1.0, -1.0):
                allowed = ok if side is None else ok & (side * self.th > 0.0)
                if not allowed.any():
                    allowed = ok if ok.any() else np.ones_like(ok)
                k = int(np.argmin(np.where(allowed, dev, np.inf)))
                row.append((self.q[k], self.th[k]))
            picks.append(row)
        out = []
        for variant in range(3):
            q = np.array([p[variant][0] for p in picks])
            th = np.array([p[variant][1] for p in picks])
            out.append(np.concatenate([q, th]))
        return out


def _random_start(rng: np.random.Generator, k: int, bounds) -> np.ndarray:
    spread = rng.uniform(0.0, 1.0)
    q = 1.0 + spread * rng.uniform(bounds.q_lo - 1.0, bounds.q_hi - 1.0, k)
    th = spread * rng.uniform(bounds.theta_lo, bounds.theta_hi, k)
    return np.concatenate([q, th])


def solve_continuous(
    sub: _Subproblem,
    rng: np.random.Generator,
    starts: int,
    deadline: float,
    warm: Sequence[np.ndarray] = (),
) -> tuple[float, np.ndarray] | None:
    """Best certified (deviation, x) over the multistart, or None.

    Starts are the nominal point, then each warm start, then random points
    until ``starts`` non-warm starts have been used.
    """
    k = len(sub.S)
    candidates = [np.concatenate([np.ones(k), np.zeros(k)])]
    candidates += [sub.clip(w) for w in warm]
    while len(candidates) < starts + len(warm):
        candidates.append(_random_start(rng, k, sub.bounds))
    best = None
    for idx, x0 in enumerate(candidates):
        if idx > 0 and time.monotonic() > deadline:
            break
        trial = sub.local_solve(x0) + [x0]
        for cand in trial:
            if not np.all(np.isfinite(cand)) or not sub.certified(cand):
                continue
            dev = sub.objective(cand)[0]
            if best is None or dev < best[0] - 1e-15:
                best = (dev, cand)
    return best


# ---------------------------------------------------------------- driver

def _pair_z(scenario: Scenario, maneuvers: Sequence[Maneuver], lines_by_pair) -> dict[tuple[int, int], bool]:
    ac = scenario.aircraft
    z = {}
    for (i, j), ln in lines_by_pair:
        dx, dy = ac[i].x0 - ac[j].x0, ac[i].y0 - ac[j].y0
        vx, vy = relative_velocity(ac[i], ac[j], maneuvers[i], maneuvers[j])
        z[(i, j)] = bool(disjunctive_check(dx, dy, vx, vy, ln, True))
    return z


def solve_avoidance(
    scenario: Scenario,
    config: SolverConfig,
    r: Sequence[float] | None = None,
    *,
    warm_start: Sequence[Maneuver] | None = None,
    time_limit: float | None = None,
) -> AvoidanceSolution:
    """Minimum-cost conflict-free speed/heading controls on infinite rays.

    ``r`` holds the projected recovery penalty of each aircraft, charged only
    when the aircraft is controlled.  ``warm_start`` maneuvers are tried as an
    extra start for every control set.
    """
    t0 = time.monotonic()
    limit = config.time_limit if time_limit is None else time_limit
    deadline = t0 + limit
    n = len(scenario.aircraft)
    r = [0.0] * n if r is None else [float(x) for x in r]
    if len(r) != n:
        raise ValueError("one penalty per aircraft required")
    if any(x < 0.0 for x in r):
        raise ValueError("recovery penalties must be non-negative")
    nominal = [Maneuver.nominal() for _ in range(n)]
    P0 = sorted(initial_conflict_set(scenario))
    data = _PairData(scenario)
    lines_by_pair = list(zip(data.pairs, data.lines))
    if not P0:
        return AvoidanceSolution(
            nominal, _pair_z(scenario, nominal, lines_by_pair), 0.0, 0.0, 0.0,
            time.monotonic() - t0, "optimal", 0, list(r),
        )
    weights = [config.lambda_f + x for x in r]
    lower = vertex_cover_lower_bound(P0, config.lambda_f, r, n)
    rng = np.random.default_rng(config.seed)
    warm = None
    if warm_start is not None:
        warm = (np.array([m.q for m in warm_start]), np.array([m.theta for m in warm_start]))

    screen = _EscapeScreen(data, scenario)
    cover_edges = [(i, j) for i, j in P0]
    tried: dict[tuple[int, ...], tuple[int, tuple[float, np.ndarray] | None]] = {}

    def attempt(S: tuple[int, ...], starts: int, incumbent) -> tuple[float, np.ndarray] | None:
        # a set first met in the incumbent phase is solved again with the full start budget
        if S in tried and tried[S][0] >= starts:
            return tried[S][1]
        sub = _Subproblem(data, S, scenario, config.w)
        warms = [
            np.concatenate([src[0][list(S)], src[1][list(S)]])
            for src in (incumbent, warm)
            if src is not None
        ]
        found = solve_continuous(sub, rng, starts, deadline, warms + screen.seeds(S, config.w))
        previous = tried.get(S, (0, None))[1]
        if previous is not None and (found is None or previous[0] < found[0]):
            found = previous
        tried[S] = (starts, found)
        return found

    def full(S, x):
        q, th = np.ones(n), np.zeros(n)
        k = len(S)
        q[list(S)] = x[:k]
        th[list(S)] = x[k:]
        return q, th

    best_obj = math.inf
    best_x = None
    best_S = None
    incumbent = None
    status = "optimal"

    def offer(S, found) -> bool:
        nonlocal best_obj, best_x, best_S, incumbent
        if found is None:
            return False
        obj = sum(weights[k] for k in S) + found[0]
        if obj < best_obj - 1e-15:
            best_obj, best_x, best_S = obj, found[1], S
            incumbent = full(S, found[1])
            log.debug("incumbent %.6f with control set %s", obj, S)
            return True
        return False

    # incumbent phase: control everyone, then release aircraft one at a time
    current = tuple(range(n))
    offer(current, attempt(current, INCUMBENT_STARTS, None))
    improved = best_x is not None
    while improved and time.monotonic() < deadline:
        improved = False
        q, th = incumbent
        devs = [(config.w * th[k] ** 2 + (1.0 - config.w) * (1.0 - q[k]) ** 2, k) for k in best_S]
        for _, k in sorted(devs):
            if time.monotonic() > deadline:
                break
            S = tuple(u for u in best_S if u != k)
            if any(a not in S and b not in S for a, b in cover_edges) or not screen.screen(S):
                continue
            if offer(S, attempt(S, INCUMBENT_STARTS, incumbent)):
                improved = True
                break

    # best-first enumeration of control sets below the incumbent cost
    for fcost, S in iter_control_sets(n, P0, weights):
        if fcost >= best_obj - 1e-12:
            break
        if time.monotonic() > deadline:
            status = "time_limit"
            break
        if not screen.screen(S):
            continue
        offer(S, attempt(S, config.starts, incumbent))

    if best_x is None:
        if status == "time_limit":
            raise TimeLimit("avoidance stage hit its time limit without a feasible solution")
        raise Infeasible("no control set admits a conflict-free maneuver within bounds")
    k = len(best_S)
    maneuvers = list(nominal)
    for idx, ac_idx in enumerate(best_S):
        maneuvers[ac_idx] = Maneuver(float(best_x[idx]), float(best_x[k + idx]), True)
    objective = avoidance_objective(maneuvers, config.w, config.lambda_f, r)
    lower = min(lower, objective)
    gap = (objective - lower) / max(objective, 1e-9)
    return AvoidanceSolution(
        maneuvers=maneuvers,
        z=_pair_z(scenario, maneuvers, lines_by_pair),
        objective=objective,
        lower_bound=lower,
        gap=gap,
        runtime=time.monotonic() - t0,
        status=status,
        sets_explored=len(tried),
        penalties=list(r),
    )
