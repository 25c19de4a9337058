from ddrom.fom.archive import load_snapshots, save_snapshots
from ddrom.fom.fields import FieldFrame, SnapshotSet
from ddrom.fom.grid import GridSpec, build_grid
from ddrom.fom.harness import run_case
from ddrom.fom.solver import (
    assemble_ppe_rhs,
    cfl_limit,
    compute_eddy_viscosity,
    solve_pressure_poisson,
    step_fom,
)
from ddrom.fom.stencils import Stencils, lid_profile

__all__ = [
    "FieldFrame",
    "GridSpec",
    "SnapshotSet",
    "Stencils",
    "assemble_ppe_rhs",
    "build_grid",
    "cfl_limit",
    "compute_eddy_viscosity",
    "lid_profile",
    "load_snapshots",
    "run_case",
    "save_snapshots",
    "solve_pressure_poisson",
    "step_fom",
]
