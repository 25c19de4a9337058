from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import model_validator

from ddrom.arrays import ArrayModel
from ddrom.errors import DimensionMismatchError
from ddrom.operators.assembly import BoundarySpec, ReducedOperatorSet, penalty_contribution

TimeScheme = Literal["first-order", "second-order"]


class RomState(ArrayModel):
    """Velocity and pressure coefficients of one reduced solution."""

    a: np.ndarray
    b: np.ndarray

    @model_validator(mode="after")
    def _finite(self) -> "RomState":
        if self.a.ndim != 1 or self.b.ndim != 1:
            raise DimensionMismatchError("state coefficients must be vectors")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("state coefficients must be finite")
        return self

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    @classmethod
    def from_vector(cls, x: np.ndarray, n_u: int) -> "RomState":
        return cls(a=x[:n_u], b=x[n_u:])

    @classmethod
    def zeros(cls, n_u: int, n_p: int) -> "RomState":
        return cls(a=np.zeros(n_u), b=np.zeros(n_p))


def _effective_scheme(history: Sequence[np.ndarray], scheme: TimeScheme) -> TimeScheme:
    if not history:
        raise ValueError("time derivative needs at least one previous state")
    if scheme == "second-order" and len(history) < 2:
        return "first-order"
    return scheme


def derivative_weight(history: Sequence[np.ndarray], scheme: TimeScheme) -> float:
    """Coefficient of the new state in the discrete derivative, times ``dt``."""
    return 1.5 if _effective_scheme(history, scheme) == "second-order" else 1.0


def time_derivative(
    a_next: np.ndarray, history: Sequence[np.ndarray], scheme: TimeScheme, dt: float
) -> np.ndarray:
    """Backward-difference derivative at the new time level.

    ``history`` lists previous coefficient vectors, most recent first. The first step
    of a second-order run falls back to the first-order difference.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if _effective_scheme(history, scheme) == "second-order":
        return (3.0 * a_next - 4.0 * history[0] + history[1]) / (2.0 * dt)
    return (a_next - history[0]) / dt


def residual(
    state: RomState,
    a_dot: np.ndarray,
    g: np.ndarray,
    tau_u: np.ndarray,
    tau_p: np.ndarray,
    opset: ReducedOperatorSet,
    boundary: BoundarySpec,
    nu: float,
) -> np.ndarray:
    """Momentum block followed by the pressure block of the closed reduced system.

    momentum: ``-M a_dot + nu (B + B_T) a - a^T C a + g^T (C_T1 + C_T2) a - H b + penalty + tau_u``
    pressure: ``D b + a^T G a - g^T (C_T3 + C_T4) a - nu N a - L + tau_p``
    """
    a, b = state.a, state.b
    if a.size != opset.n_u or b.size != opset.n_p or g.size != opset.n_nut:
        raise DimensionMismatchError(
            f"state ({a.size}, {b.size}, {g.size}) does not match operators {opset.dims}"
        )
    momentum = (
        -opset.M @ a_dot
        + nu * (opset.B + opset.B_T) @ a
        - np.einsum("ijk,j,k->i", opset.C, a, a)
        + np.einsum("ijk,j,k->i", opset.C_T1 + opset.C_T2, g, a)
        - opset.H @ b
        + penalty_contribution(a, opset, boundary)
        + tau_u
    )
    pressure = (
        opset.D @ b
        + np.einsum("ijk,j,k->i", opset.G, a, a)
        - np.einsum("ijk,j,k->i", opset.C_T3 + opset.C_T4, g, a)
        - nu * opset.N @ a
        - opset.L
        + tau_p
    )
    return np.concatenate([momentum, pressure])


def polynomial_jacobian(
    state: RomState,
    a_dot_weight: float,
    opset: ReducedOperatorSet,
    boundary: BoundarySpec,
    nu: float,
    g: np.ndarray | None = None,
) -> np.ndarray:
    """Analytic Jacobian of the residual at a frozen eddy viscosity ``g`` without the closure.

    ``a_dot_weight`` is ``d a_dot / d a``: ``c / dt`` for a time step, 0 when steady.
    ``g = None`` is a zero eddy viscosity.
    """
    a = state.a
    n_u = opset.n_u
    J = np.zeros((n_u + opset.n_p, n_u + opset.n_p))
    quad_c = np.einsum("ijk,k->ij", opset.C, a) + np.einsum("ijk,j->ik", opset.C, a)
    quad_g = np.einsum("ijk,k->ij", opset.G, a) + np.einsum("ijk,j->ik", opset.G, a)
    penalty = boundary.tau * sum(opset.E_k, np.zeros((n_u, n_u)))
    J[:n_u, :n_u] = -a_dot_weight * opset.M + nu * (opset.B + opset.B_T) - quad_c - penalty
    J[:n_u, n_u:] = -opset.H
    J[n_u:, :n_u] = quad_g - nu * opset.N
    if g is not None:
        J[:n_u, :n_u] += np.einsum("ijk,j->ik", opset.C_T1 + opset.C_T2, g)
        J[n_u:, :n_u] -= np.einsum("ijk,j->ik", opset.C_T3 + opset.C_T4, g)
    J[n_u:, n_u:] = opset.D
    return J
