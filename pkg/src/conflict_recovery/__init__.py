"""Conflict-free 2D aircraft trajectories with explicit recovery to the planned route."""
from .avoidance import AvoidanceSolution, solve_avoidance
from .errors import (
    ConflictRecoveryError,
    DegenerateGeometry,
    DegenerateRecovery,
    Infeasible,
    ParseError,
    TangentGeometry,
    TimeLimit,
    TooDense,
)
from .geometry import AircraftState, ControlBounds, Maneuver, initial_conflict_set, is_separated, separation_metrics
from .oracle import SimulationResult, simulate
from .penalty_loop import CostLedger, PipelineResult, compare_modes, run, solve_mode
from .recovery import (
    OmegaSets,
    RecoverySolution,
    build_omega_sets,
    recovery_geometry,
    solve_recovery_exact,
    solve_recovery_greedy,
)
from .scenario import Scenario, SolverConfig, generate_cp, generate_rcp, read_scenario, read_solution

__all__ = [
    "AircraftState",
    "AvoidanceSolution",
    "ConflictRecoveryError",
    "ControlBounds",
    "CostLedger",
    "DegenerateGeometry",
    "DegenerateRecovery",
    "Infeasible",
    "Maneuver",
    "OmegaSets",
    "ParseError",
    "PipelineResult",
    "RecoverySolution",
    "Scenario",
    "SimulationResult",
    "SolverConfig",
    "TangentGeometry",
    "TimeLimit",
    "TooDense",
    "build_omega_sets",
    "compare_modes",
    "generate_cp",
    "generate_rcp",
    "initial_conflict_set",
    "is_separated",
    "read_scenario",
    "read_solution",
    "recovery_geometry",
    "run",
    "separation_metrics",
    "simulate",
    "solve_avoidance",
    "solve_mode",
    "solve_recovery_exact",
    "solve_recovery_greedy",
]
