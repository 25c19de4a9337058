from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from ddrom.config import SolverConfig
from ddrom.errors import DimensionMismatchError, NewtonConvergenceError, SingularJacobianError
from ddrom.operators.assembly import BoundarySpec, ReducedOperatorSet
from ddrom.rom.residual import (
    RomState,
    derivative_weight,
    polynomial_jacobian,
    residual,
    time_derivative,
)

TurbulenceMap = Callable[[np.ndarray, np.ndarray], np.ndarray]
ClosureMap = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class NewtonResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    state: RomState
    iterations: int
    residual_norm: float
    converged: bool
    residual_history: list[float] = []


class SolverContext(BaseModel):
    """Read-only inputs shared by every solve of one reduced model.

    ``turbulence(a, mu)`` returns the eddy-viscosity coefficients and
    ``closure(a, g, mu)`` the stacked correction ``(tau_u, tau_p)``; either may be
    ``None`` (zero eddy viscosity, no correction).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    opset: ReducedOperatorSet
    boundary: BoundarySpec
    nu: float
    config: SolverConfig = SolverConfig()
    turbulence: TurbulenceMap | None = None
    closure: ClosureMap | None = None

    def eddy_viscosity(self, a: np.ndarray, mu: np.ndarray) -> np.ndarray:
        if self.turbulence is None:
            return np.zeros(self.opset.n_nut)
        return np.asarray(self.turbulence(a, mu), dtype=np.float64)

    def correction(self, a: np.ndarray, g: np.ndarray, mu: np.ndarray) -> np.ndarray:
        if self.closure is None:
            return np.zeros(self.opset.n_u + self.opset.n_p)
        return np.asarray(self.closure(a, g, mu), dtype=np.float64)


def damped_newton(
    x0: np.ndarray,
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    config: SolverConfig,
) -> tuple[np.ndarray, int, list[float]]:
    """Newton iteration with step halving on the residual 2-norm.

    Returns the converged iterate, the number of Newton updates and the residual
    norm after each of them (starting with the initial one).

    Raises:
        SingularJacobianError: the Jacobian condition number exceeds ``config.cond_limit``.
        NewtonConvergenceError: no descent after ``config.max_halvings`` halvings or no
            convergence within ``config.max_iter`` iterations. Both carry the best iterate.
    """
    x = np.array(x0, dtype=np.float64)
    r = fun(x)
    norm = float(np.linalg.norm(r))
    history = [norm]
    best_x, best_norm = x.copy(), norm

    for iteration in range(config.max_iter + 1):
        if norm <= config.tol:
            return x, iteration, history
        if iteration == config.max_iter:
            break
        J = jac(x)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > config.cond_limit:
            raise SingularJacobianError(
                f"Jacobian condition number {cond:.3e} exceeds {config.cond_limit:.1e}",
                best_norm,
                best_x,
                iteration,
            )
        dx = scipy.linalg.solve(J, -r)

        step = 1.0
        for _ in range(config.max_halvings + 1):
            x_try = x + step * dx
            r_try = fun(x_try)
            norm_try = float(np.linalg.norm(r_try))
            if norm_try < norm:
                break
            step *= 0.5
        else:
            raise NewtonConvergenceError(
                f"no residual decrease after {config.max_halvings} step halvings",
                best_norm,
                best_x,
                iteration + 1,
            )
        x, r, norm = x_try, r_try, norm_try
        history.append(norm)
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm

    raise NewtonConvergenceError(
        f"no convergence within {config.max_iter} iterations", best_norm, best_x, config.max_iter
    )


def _network_columns(
    a: np.ndarray,
    mu: np.ndarray,
    context: SolverContext,
    base: np.ndarray,
    network_terms: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """Forward differences of the network-dependent terms, step ``h (1 + |a_j|)``."""
    columns = np.zeros((base.size, a.size))
    for j in range(a.size):
        h = context.config.fd_step * (1.0 + abs(a[j]))
        shifted = a.copy()
        shifted[j] += h
        columns[:, j] = (network_terms(shifted, mu) - base) / h
    return columns


def newton_solve(
    initial: RomState,
    context: SolverContext,
    mu: np.ndarray,
    history: Sequence[np.ndarray] = (),
    dt: float | None = None,
) -> NewtonResult:
    """Solve one steady (empty ``history``) or time-discrete reduced system.

    Each evaluation takes ``g = G(a, mu)`` and ``tau = M(a, g, mu)`` at the current
    iterate. Polynomial terms, including ``g^T C_T a`` at frozen ``g``, are differentiated
    analytically; only the dependence through the networks uses forward differences.
    """
    opset, boundary, nu = context.opset, context.boundary, context.nu
    n_u, n_p = opset.n_u, opset.n_p
    mu = np.asarray(mu, dtype=np.float64)
    scheme = context.config.scheme
    unsteady = len(history) > 0
    if unsteady and dt is None:
        raise ValueError("a time step needs dt")
    weight = derivative_weight(history, scheme) / dt if unsteady else 0.0
    has_networks = context.turbulence is not None or context.closure is not None

    def fun(x: np.ndarray) -> np.ndarray:
        state = RomState.from_vector(x, n_u)
        a_dot = time_derivative(state.a, history, scheme, dt) if unsteady else np.zeros(n_u)
        g = context.eddy_viscosity(state.a, mu)
        tau = context.correction(state.a, g, mu)
        return residual(state, a_dot, g, tau[:n_u], tau[n_u:], opset, boundary, nu)

    def jac(x: np.ndarray) -> np.ndarray:
        state = RomState.from_vector(x, n_u)
        g = context.eddy_viscosity(state.a, mu)
        J = polynomial_jacobian(state, weight, opset, boundary, nu, g)
        if has_networks:

            def network_terms(a: np.ndarray, mu: np.ndarray) -> np.ndarray:
                # explicit velocity factor frozen at the iterate
                g = context.eddy_viscosity(a, mu)
                tau = context.correction(a, g, mu)
                turb_u = np.einsum("ijk,j,k->i", opset.C_T1 + opset.C_T2, g, state.a)
                turb_p = np.einsum("ijk,j,k->i", opset.C_T3 + opset.C_T4, g, state.a)
                return np.concatenate([turb_u, -turb_p]) + tau

            base = network_terms(state.a, mu)
            J[:, :n_u] += _network_columns(state.a, mu, context, base, network_terms)
        return J

    if initial.a.size != n_u or initial.b.size != n_p:
        raise DimensionMismatchError(
            f"initial state ({initial.a.size}, {initial.b.size}) does not match {opset.dims}"
        )
    x, iterations, norms = damped_newton(initial.vector, fun, jac, context.config)
    return NewtonResult(
        state=RomState.from_vector(x, n_u),
        iterations=iterations,
        residual_norm=norms[-1],
        converged=True,
        residual_history=norms,
    )


def state_residual(
    state: RomState,
    context: SolverContext,
    mu: np.ndarray,
    history: Sequence[np.ndarray] = (),
    dt: float | None = None,
) -> np.ndarray:
    """Residual of ``state`` re-evaluated from scratch, e.g. to certify a solve."""
    n_u = context.opset.n_u
    a_dot = (
        time_derivative(state.a, history, context.config.scheme, dt)
        if len(history) > 0
        else np.zeros(n_u)
    )
    g = context.eddy_viscosity(state.a, mu)
    tau = context.correction(state.a, g, mu)
    return residual(state, a_dot, g, tau[:n_u], tau[n_u:], context.opset, context.boundary, context.nu)
