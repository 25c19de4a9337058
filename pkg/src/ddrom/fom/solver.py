from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from ddrom.config import FlowConfig
from ddrom.errors import FomDivergenceError, PressureSolveError
from ddrom.fom.fields import FieldFrame
from ddrom.fom.grid import GridSpec
from ddrom.fom.stencils import Stencils, lid_profile


def _stencils(grid: GridSpec, stencils: Stencils | None) -> Stencils:
    return stencils if stencils is not None else Stencils(grid)


def cfl_limit(state: FieldFrame, grid: GridSpec, flow: FlowConfig | None = None) -> float:
    """Largest dt allowed by the convective CFL bound for ``state``."""
    flow = flow or FlowConfig()
    lid = lid_profile(grid, flow.lid_velocity, flow.lid_amplitude)
    speed = max(float(np.max(np.abs(state.u), initial=0.0)), float(np.max(np.abs(lid), initial=0.0)))
    if speed == 0.0:
        return np.inf
    spacing = min(grid.dx, float(np.min(grid.heights)))
    return flow.cfl_safety * spacing / speed


def compute_eddy_viscosity(
    u: np.ndarray,
    grid: GridSpec,
    smagorinsky: float = 0.17,
    lid: np.ndarray | None = None,
    stencils: Stencils | None = None,
) -> np.ndarray:
    """Smagorinsky-type ``(C_s Delta)^2 |grad u + grad u^T|`` with ``Delta = sqrt(area)``."""
    stencils = _stencils(grid, stencils)
    delta_sq = np.asarray(grid.cell_areas)
    return (smagorinsky**2) * delta_sq * stencils.strain_norm(u, lid)


def assemble_ppe_rhs(
    u: np.ndarray,
    nut: np.ndarray,
    grid: GridSpec,
    nu: float,
    lid: np.ndarray | None = None,
    stencils: Stencils | None = None,
) -> np.ndarray:
    """Compatible right-hand side ``div(stress - conv)`` with its area-weighted mean removed."""
    stencils = _stencils(grid, stencils)
    eta = nu + nut
    stress = stencils.turb1(eta, u, lid) + stencils.turb2(eta, u, lid)
    rhs = stencils.div_f @ (stress - stencils.conv(u, u))
    return rhs - np.dot(stencils.areas, rhs) / stencils.areas.sum()


def solve_pressure_poisson(
    u: np.ndarray,
    nut: np.ndarray,
    grid: GridSpec,
    nu: float,
    flow: FlowConfig | None = None,
    lid: np.ndarray | None = None,
    stencils: Stencils | None = None,
) -> np.ndarray:
    flow = flow or FlowConfig()
    stencils = _stencils(grid, stencils)
    rhs = assemble_ppe_rhs(u, nut, grid, nu, lid, stencils)
    return solve_pinned_poisson(rhs, stencils, flow)


def solve_pinned_poisson(rhs: np.ndarray, stencils: Stencils, flow: FlowConfig) -> np.ndarray:
    """Solve ``lap_flux p = rhs`` for a compatible ``rhs`` with ``p[0] = 0``."""
    system = stencils.pinned_laplacian()
    pinned_rhs = rhs.copy()
    pinned_rhs[0] = 0.0
    if flow.ppe_solver == "direct":
        p = spla.spsolve(system, pinned_rhs)
        # the pinned row is an identity row; clear round-off from the factorisation
        p[0] = 0.0
        return p

    ilu = spla.spilu(system)
    preconditioner = spla.LinearOperator(system.shape, ilu.solve)
    p, info = spla.gmres(
        system,
        pinned_rhs,
        rtol=flow.ppe_tol,
        atol=0.0,
        maxiter=flow.ppe_maxiter,
        M=preconditioner,
    )
    if info != 0:
        residual = float(np.linalg.norm(system @ p - pinned_rhs))
        raise PressureSolveError(
            f"Pressure Poisson solver did not converge in {flow.ppe_maxiter} iterations", residual
        )
    p[0] = 0.0
    return p


def step_fom(
    state: FieldFrame,
    grid: GridSpec,
    nu: float,
    dt: float,
    flow: FlowConfig | None = None,
    stencils: Stencils | None = None,
    step: int = 0,
) -> FieldFrame:
    """Advance one semi-implicit step, then refresh the eddy viscosity and the pressure.

    Viscous diffusion ``nu (lap u + grad div u)`` is implicit; convection, the eddy
    viscosity stress and the pressure gradient of ``state`` are explicit.
    """
    flow = flow or FlowConfig()
    stencils = _stencils(grid, stencils)
    if dt > cfl_limit(state, grid, flow):
        raise ValueError(
            f"dt={dt} violates the CFL bound {cfl_limit(state, grid, flow):.4e} "
            f"(safety {flow.cfl_safety})"
        )
    lid = lid_profile(grid, flow.lid_velocity, flow.lid_amplitude)

    u, p, nut = state.u, state.p, state.nut
    explicit = (
        -stencils.conv(u, u)
        - stencils.grad @ p
        + nu * stencils.lap_v_lift(lid)
        + stencils.turb1(nut, u, lid)
        + stencils.turb2(nut, u, lid)
    )
    u_next = stencils.implicit_solver(nu, dt).solve(u + dt * explicit)
    nut_next = compute_eddy_viscosity(u_next, grid, flow.smagorinsky, lid, stencils)
    p_next = solve_pressure_poisson(u_next, nut_next, grid, nu, flow, lid, stencils)

    for name, values in (("u", u_next), ("p", p_next), ("nut", nut_next)):
        norm = float(np.linalg.norm(values))
        if not np.isfinite(norm) or norm > flow.divergence_limit:
            raise FomDivergenceError(f"FOM diverged in field {name}", step, norm)

    return FieldFrame(u=u_next, p=p_next, nut=nut_next, t=state.t + dt, mu=state.mu)
