from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import model_validator
from rich.console import Console
from rich.progress import Progress

from ddrom.arrays import ArrayModel
from ddrom.closure.ansatz import QuadraticAnsatz, evaluate_quadratic_ansatz
from ddrom.config import SolverConfig
from ddrom.errors import DimensionMismatchError, NewtonError
from ddrom.nets.closure import NetworkClosure
from ddrom.operators.assembly import BoundarySpec, ReducedOperatorSet
from ddrom.rom.newton import SolverContext, newton_solve
from ddrom.rom.residual import RomState


class RomTrajectory(ArrayModel):
    """Reduced states at every time node with the Newton record of each step.

    ``times``, ``a`` and ``b`` hold ``n_steps + 1`` nodes including the initial
    condition; ``iterations``, ``residuals`` and ``converged`` hold one entry per step.
    """

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    iterations: tuple[int, ...]
    residuals: np.ndarray
    converged: tuple[bool, ...]
    mu: np.ndarray

    @model_validator(mode="after")
    def _one_state_per_node(self) -> "RomTrajectory":
        nodes = self.times.size
        steps = nodes - 1
        if self.a.shape[0] != nodes or self.b.shape[0] != nodes:
            raise DimensionMismatchError(f"{nodes} time nodes but {self.a.shape[0]} states")
        if len(self.iterations) != steps or self.residuals.size != steps or len(self.converged) != steps:
            raise DimensionMismatchError(f"Newton record does not cover {steps} steps")
        return self

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    def state(self, index: int) -> RomState:
        return RomState(a=self.a[index], b=self.b[index])


def build_context(
    opset: ReducedOperatorSet,
    boundary: BoundarySpec,
    nu: float,
    config: SolverConfig,
    networks: NetworkClosure | None = None,
    ansatz: QuadraticAnsatz | None = None,
) -> SolverContext:
    """Wire the closure selected by ``config.closure`` into a solver context.

    The eddy viscosity always comes from the G network when one is given, so the
    ``none`` mode is the plain eddy-viscosity ROM.
    """
    turbulence = networks.turbulence if networks is not None else None
    closure = None
    if config.closure in ("dd", "dd-star"):
        if networks is None or networks.mnet is None:
            raise ValueError(f"closure mode {config.closure} needs a trained correction network")
        closure = networks.correction
    elif config.closure == "quadratic":
        if ansatz is None:
            raise ValueError("closure mode quadratic needs a fitted ansatz")
        if (ansatz.n_u, ansatz.n_p) != (opset.n_u, opset.n_p):
            raise DimensionMismatchError(
                f"ansatz dims {(ansatz.n_u, ansatz.n_p)} do not match operators {opset.dims}"
            )

        def closure(a: np.ndarray, g: np.ndarray, mu: np.ndarray) -> np.ndarray:
            return evaluate_quadratic_ansatz(ansatz, a)

    return SolverContext(
        opset=opset, boundary=boundary, nu=nu, config=config, turbulence=turbulence, closure=closure
    )


class SteadySolution(RomState):
    """Converged steady state with the Newton record that produced it."""

    iterations: int
    residual_norm: float
    residual_history: list[float] = []


def solve_steady(mu: Sequence[float], context: SolverContext, initial: RomState) -> SteadySolution:
    """Steady reduced solution at ``mu``, started from the projected initial guess.

    Geometric parameters need an operator set assembled for ``mu`` (see
    ``assemble_for_parameter``). Newton failures propagate.
    """
    result = newton_solve(initial, context, np.asarray(mu, dtype=np.float64))
    return SteadySolution(
        a=result.state.a,
        b=result.state.b,
        iterations=result.iterations,
        residual_norm=result.residual_norm,
        residual_history=result.residual_history,
    )


def solve_unsteady(
    mu: Sequence[float],
    context: SolverContext,
    initial: RomState,
    t0: float = 0.0,
    console: Console | None = None,
    quiet: bool = False,
) -> RomTrajectory:
    """Time-march the reduced system from the projected initial condition.

    The step to ``t_{n+1}`` evaluates the networks with ``[t_n, *mu]`` and warm-starts
    Newton from the state at ``t_n``. A step that does not converge keeps its best
    iterate, is flagged and the run continues.

    Args:
        mu: physical parameters, without time.
        context: operators, closure maps and solver settings.
        initial: reduced initial condition at ``t0``.
        t0: initial time.
        console: rich console for progress output.
        quiet: disable the progress display.

    Returns:
        RomTrajectory over ``horizon * extrapolation`` seconds.
    """
    console = console or Console()
    config = context.config
    mu_phys = np.asarray(mu, dtype=np.float64)
    n_u = context.opset.n_u
    n_steps = int(round(config.horizon * config.extrapolation / config.dt))

    states = [initial]
    iterations: list[int] = []
    residuals: list[float] = []
    converged: list[bool] = []
    with Progress(console=console, disable=quiet) as progress:
        task = progress.add_task("[cyan]Solving reduced system...", total=n_steps)
        for n in range(n_steps):
            t_n = t0 + n * config.dt
            mu_n = np.concatenate([[t_n], mu_phys])
            history = [s.a for s in states[-1:-3:-1]]
            try:
                result = newton_solve(states[-1], context, mu_n, history, config.dt)
                state, its, norm, ok = result.state, result.iterations, result.residual_norm, True
            except NewtonError as error:
                state = RomState.from_vector(error.iterate, n_u)
                its, norm, ok = error.iterations, error.residual, False
                console.print(
                    f"[yellow]Step {n + 1} at t = {t_n + config.dt:.4g} did not converge: {error}[/yellow]"
                )
            states.append(state)
            iterations.append(its)
            residuals.append(norm)
            converged.append(ok)
            progress.advance(task)

    if not quiet:
        failed = converged.count(False)
        colour = "green" if failed == 0 else "yellow"
        console.print(f"[{colour}]Solved {n_steps} steps, {failed} not converged[/{colour}]")
    return RomTrajectory(
        times=t0 + config.dt * np.arange(n_steps + 1),
        a=np.array([s.a for s in states]),
        b=np.array([s.b for s in states]),
        iterations=tuple(iterations),
        residuals=np.array(residuals),
        converged=tuple(converged),
        mu=mu_phys,
    )
