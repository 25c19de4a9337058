from ddrom.rom.archive import load_trajectory, save_trajectory
from ddrom.rom.newton import NewtonResult, SolverContext, damped_newton, newton_solve, state_residual
from ddrom.rom.residual import RomState, residual, time_derivative
from ddrom.rom.solver import (
    RomTrajectory,
    SteadySolution,
    build_context,
    solve_steady,
    solve_unsteady,
)

__all__ = [
    "NewtonResult",
    "RomState",
    "RomTrajectory",
    "SolverContext",
    "SteadySolution",
    "build_context",
    "damped_newton",
    "load_trajectory",
    "newton_solve",
    "residual",
    "save_trajectory",
    "solve_steady",
    "solve_unsteady",
    "state_residual",
    "time_derivative",
]
