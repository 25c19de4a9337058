from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from rich.console import Console
from rich.progress import Progress

from ddrom.config import CaseConfig
from ddrom.errors import FomConvergenceError
from ddrom.fom.fields import FieldFrame, SnapshotSet
from ddrom.fom.grid import GridSpec, build_grid
from ddrom.fom.solver import compute_eddy_viscosity, solve_pressure_poisson, step_fom
from ddrom.fom.stencils import Stencils, lid_profile


def initial_frame(
    grid: GridSpec,
    config: CaseConfig,
    mu: np.ndarray,
    nu: float,
    rng: np.random.Generator,
    stencils: Stencils,
) -> FieldFrame:
    """Smooth seeded perturbation of the fluid at rest, with consistent nut and p."""
    flow = config.flow
    x = np.asarray(grid.centres)[:, 0]
    rows = np.repeat(np.arange(grid.ny), grid.nx)
    bump = np.sin(np.pi * (rows + 0.5) / grid.ny)
    c = rng.uniform(-1.0, 1.0, size=3)
    phase = 2.0 * np.pi * x / grid.lx
    scale = flow.perturbation * flow.lid_velocity
    ux = scale * bump * (c[0] * np.sin(phase) + c[1] * np.cos(phase))
    uy = scale * bump * c[2] * np.sin(phase)
    u = np.concatenate([ux, uy])

    lid = lid_profile(grid, flow.lid_velocity, flow.lid_amplitude)
    nut = compute_eddy_viscosity(u, grid, flow.smagorinsky, lid, stencils)
    p = solve_pressure_poisson(u, nut, grid, nu, flow, lid, stencils)
    return FieldFrame(u=u, p=p, nut=nut, t=0.0, mu=mu)


def _run_unsteady(
    config: CaseConfig, grid: GridSpec, index: int, param: tuple[float, ...], advance
) -> list[FieldFrame]:
    nu = float(param[0])
    stencils = Stencils(grid)
    rng = np.random.default_rng([config.seed, index])
    state = initial_frame(grid, config, np.array([nu]), nu, rng, stencils)
    frames = [state]
    n_steps = int(round(config.horizon / config.dt))
    for step in range(1, n_steps + 1):
        state = step_fom(state, grid, nu, config.dt, config.flow, stencils, step=step)
        if step % config.stride == 0:
            frames.append(state)
        advance()
    return frames


def _run_steady(config: CaseConfig, param: tuple[float, ...], advance) -> list[FieldFrame]:
    g = config.grid
    grid = build_grid(g.nx, g.ny, g.lx, g.ly, param, g.periodic, g.deformation_box)
    stencils = Stencils(grid)
    mu = np.array(param, dtype=np.float64)
    state = FieldFrame.zeros(grid.n_cells, mu)
    lid = lid_profile(grid, config.flow.lid_velocity, config.flow.lid_amplitude)
    state = FieldFrame(
        u=state.u,
        p=solve_pressure_poisson(state.u, state.nut, grid, config.nu, config.flow, lid, stencils),
        nut=state.nut,
        t=0.0,
        mu=mu,
    )
    frames = [state] if config.keep_intermediates else []
    for step in range(1, config.max_steps + 1):
        previous = state
        state = step_fom(previous, grid, config.nu, config.dt, config.flow, stencils, step=step)
        norm = np.linalg.norm(previous.u)
        change = np.linalg.norm(state.u - previous.u)
        converged = change == 0.0 or (norm > 0.0 and change / norm <= config.steady_tol)
        if converged:
            frames.append(state)
            advance()
            return frames
        if config.keep_intermediates and step % config.stride == 0:
            frames.append(state)
        advance()
    raise FomConvergenceError(
        f"Steady iteration for mu={param} did not reach tolerance {config.steady_tol} "
        f"in {config.max_steps} steps"
    )


def reference_grid(config: CaseConfig) -> GridSpec:
    """Undeformed grid, or the mid-configuration grid of the deformed family."""
    g = config.grid
    if config.family == "steady-deformed":
        mid = np.mean(np.asarray(config.params, dtype=np.float64), axis=0)
        return build_grid(g.nx, g.ny, g.lx, g.ly, tuple(mid), g.periodic, g.deformation_box)
    return build_grid(g.nx, g.ny, g.lx, g.ly, (), g.periodic, g.deformation_box)


def run_case(
    config: CaseConfig, console: Console | None = None, quiet: bool = False
) -> SnapshotSet:
    """Generate the snapshot ensemble of one case family.

    Args:
        config: case family, parameter list, stride, horizon and grid/flow settings.
        console: rich console for progress output.
        quiet: disable the progress display.

    Returns:
        SnapshotSet with frames grouped by parameter in the order of ``config.params``.
    """
    console = console or Console()
    if not config.params:
        raise ValueError("run_case needs at least one parameter")
    params = tuple(tuple(float(v) for v in param) for param in config.params)
    grid = reference_grid(config)

    if config.family == "unsteady-channel":
        total = len(params) * int(round(config.horizon / config.dt))
        kind = "unsteady"
    else:
        total = len(params) * config.max_steps
        kind = "steady-with-intermediates" if config.keep_intermediates else "steady"

    with Progress(console=console, disable=quiet) as progress:
        task = progress.add_task(f"[cyan]Running {config.family}...", total=total)

        def advance() -> None:
            progress.advance(task)

        def run(index: int) -> list[FieldFrame]:
            if config.family == "unsteady-channel":
                return _run_unsteady(config, grid, index, params[index], advance)
            return _run_steady(config, params[index], advance)

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                groups = list(pool.map(run, range(len(params))))
        else:
            groups = [run(index) for index in range(len(params))]

    frames = tuple(frame for group in groups for frame in group)
    if not quiet:
        console.print(
            f"[green]Generated {len(frames)} frames for {len(params)} parameter(s)[/green]"
        )
    return SnapshotSet(grid=grid, frames=frames, params=params, kind=kind, config=config)
