from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, field_validator, model_validator

from ddrom.arrays import ArrayModel
from ddrom.config import GridConfig
from ddrom.errors import DimensionMismatchError
from ddrom.fom.grid import GridSpec, build_grid
from ddrom.fom.stencils import Stencils, lid_profile
from ddrom.pod.basis import PodBasis

Dims = tuple[int, int, int]


class BoundarySpec(BaseModel):
    """Non-homogeneous Dirichlet boundaries enforced by the penalty method."""

    boundary_ids: list[str] = ["lid"]
    values: list[float] = [1.0]
    tau: float = 1e3
    lid_amplitude: float = 0.5

    @field_validator("tau")
    @classmethod
    def _positive_tau(cls, tau: float) -> float:
        if tau <= 0:
            raise ValueError("penalty weight tau must be > 0")
        return tau

    @model_validator(mode="after")
    def _matching_lengths(self) -> "BoundarySpec":
        if len(self.boundary_ids) != len(self.values):
            raise ValueError("one prescribed value per boundary id is required")
        return self


class ReducedOperatorSet(ArrayModel):
    """Galerkin matrices and tensors of the eddy-viscosity ROM.

    Tensor layout is ``T[i, j, k]`` with ``i`` the test mode, so the quadratic term
    ``a^T C a`` is ``einsum("ijk,j,k->i", C, a, a)`` and ``g^T C_T1 a`` is
    ``einsum("ijk,j,k->i", C_T1, g, a)``.
    """

    M: np.ndarray
    B: np.ndarray
    B_T: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    C: np.ndarray
    G: np.ndarray
    C_T1: np.ndarray
    C_T2: np.ndarray
    C_T3: np.ndarray
    C_T4: np.ndarray
    L: np.ndarray
    E_k: tuple[np.ndarray, ...]
    D_k: tuple[np.ndarray, ...]
    lid_trace: np.ndarray
    lid_lengths: np.ndarray
    lid_shape: np.ndarray
    dims: Dims
    mu: np.ndarray
    L_is_zero: bool = True

    @model_validator(mode="after")
    def _shapes(self) -> "ReducedOperatorSet":
        nu, np_, nn = self.dims
        expected = {
            "M": (nu, nu),
            "B": (nu, nu),
            "B_T": (nu, nu),
            "H": (nu, np_),
            "D": (np_, np_),
            "N": (np_, nu),
            "C": (nu, nu, nu),
            "G": (np_, nu, nu),
            "C_T1": (nu, nn, nu),
            "C_T2": (nu, nn, nu),
            "C_T3": (np_, nn, nu),
            "C_T4": (np_, nn, nu),
            "L": (np_,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatchError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        for E, D in zip(self.E_k, self.D_k):
            if E.shape != (nu, nu) or D.shape != (nu,):
                raise DimensionMismatchError("boundary operators do not match N_u")
        return self

    @property
    def n_u(self) -> int:
        return self.dims[0]

    @property
    def n_p(self) -> int:
        return self.dims[1]

    @property
    def n_nut(self) -> int:
        return self.dims[2]

    def truncate(self, n_u: int, n_p: int, n_nut: int) -> "ReducedOperatorSet":
        """Leading sub-blocks for smaller dimensions of the same hierarchical bases."""
        if n_u > self.n_u or n_p > self.n_p or n_nut > self.n_nut:
            raise DimensionMismatchError(
                f"Cannot truncate {self.dims} to larger dims {(n_u, n_p, n_nut)}"
            )
        u, p, t = slice(0, n_u), slice(0, n_p), slice(0, n_nut)
        return ReducedOperatorSet(
            M=self.M[u, u],
            B=self.B[u, u],
            B_T=self.B_T[u, u],
            H=self.H[u, p],
            D=self.D[p, p],
            N=self.N[p, u],
            C=self.C[u, u, u],
            G=self.G[p, u, u],
            C_T1=self.C_T1[u, t, u],
            C_T2=self.C_T2[u, t, u],
            C_T3=self.C_T3[p, t, u],
            C_T4=self.C_T4[p, t, u],
            L=self.L[p],
            E_k=tuple(E[u, u] for E in self.E_k),
            D_k=tuple(D[u] for D in self.D_k),
            lid_trace=self.lid_trace[:, u],
            lid_lengths=self.lid_lengths,
            lid_shape=self.lid_shape,
            dims=(n_u, n_p, n_nut),
            mu=self.mu,
            L_is_zero=self.L_is_zero,
        )

    def boundary_trace(self, a: np.ndarray) -> np.ndarray:
        """Velocity of the reduced field at the lid cells, x block then y block."""
        return self.lid_trace @ a

    def trace_mismatch(self, a: np.ndarray, boundary: BoundarySpec) -> float:
        """Edge-length weighted L2 distance between the lid trace and the prescribed lid."""
        trace = self.boundary_trace(a)
        nx = self.lid_lengths.size
        target_x = boundary.values[0] * self.lid_shape
        diff_sq = (trace[:nx] - target_x) ** 2 + trace[nx:] ** 2
        return float(np.sqrt(np.sum(self.lid_lengths * diff_sq)))


def penalty_contribution(
    a: np.ndarray,
    opset: ReducedOperatorSet,
    boundary: BoundarySpec,
    tau: float | None = None,
) -> np.ndarray:
    """``tau * sum_k (U_k D^k - E^k a)``."""
    tau = boundary.tau if tau is None else tau
    out = np.zeros(opset.n_u)
    for value, E, D in zip(boundary.values, opset.E_k, opset.D_k):
        out += value * D - E @ a
    return tau * out


def _contract(test: np.ndarray, weights: np.ndarray, fields: np.ndarray) -> np.ndarray:
    # (dof, n_i) x (dof, n_j, n_k) -> (n_i, n_j, n_k)
    return np.einsum("ai,ajk->ijk", weights[:, None] * test, fields)


def _wall_operator(
    stencils: Stencils, grid: GridSpec, pmodes: np.ndarray, umodes: np.ndarray
) -> np.ndarray:
    """Midpoint-rule edge quadrature of ``(n x grad chi_i, curl phi_j)`` over the walls."""
    if grid.periodic:
        return np.zeros((pmodes.shape[1], umodes.shape[1]))
    n = stencils.n
    dchi_dx = stencils.dx_op @ pmodes
    dchi_dy = stencils.dy_flux @ pmodes
    curl = stencils.dx_op @ umodes[n:] - stencils.dy_wall @ umodes[:n]

    top = stencils.top_cells()
    bottom = np.arange(grid.nx)
    normals = np.asarray(grid.lid_normals)
    tangential_top = normals[:, 0, None] * dchi_dy[top] - normals[:, 1, None] * dchi_dx[top]
    # bottom wall normal is (0, -1)
    tangential_bottom = dchi_dx[bottom]
    lengths_top = np.asarray(grid.lid_lengths)
    lengths_bottom = np.full(grid.nx, grid.dx)
    return (lengths_top[:, None] * tangential_top).T @ curl[top] + (
        lengths_bottom[:, None] * tangential_bottom
    ).T @ curl[bottom]


def assemble(
    ubasis: PodBasis,
    pbasis: PodBasis,
    nutbasis: PodBasis,
    grid: GridSpec,
    boundary: BoundarySpec,
    dims: Dims | None = None,
    mu: Sequence[float] = (),
) -> ReducedOperatorSet:
    """Project every ROM operator on the first ``dims`` modes of each basis.

    Quadrature uses the cell areas of ``grid`` and the homogeneous parts of the FOM
    stencils; lid data enters only through the penalty operators ``E^k`` and ``D^k``.
    """
    if dims is None:
        dims = (ubasis.rank, pbasis.rank, nutbasis.rank)
    n_u, n_p, n_nut = dims
    if n_u > ubasis.rank or n_p > pbasis.rank or n_nut > nutbasis.rank:
        raise DimensionMismatchError(
            f"dims {dims} exceed basis ranks {(ubasis.rank, pbasis.rank, nutbasis.rank)}"
        )
    n = grid.n_cells
    if ubasis.modes.shape[0] != 2 * n or pbasis.modes.shape[0] != n or nutbasis.modes.shape[0] != n:
        raise DimensionMismatchError("bases are not laid out on this grid")

    stencils = Stencils(grid)
    w = stencils.velocity_weights
    phi = np.asarray(ubasis.modes[:, :n_u])
    chi = np.asarray(pbasis.modes[:, :n_p])
    eta = np.asarray(nutbasis.modes[:, :n_nut])
    w_phi = w[:, None] * phi

    M = phi.T @ w_phi
    B = w_phi.T @ (stencils.lap_v @ phi)
    B_T = w_phi.T @ (stencils.grad_div @ phi)
    grad_chi = stencils.grad @ chi
    H = w_phi.T @ grad_chi
    D = grad_chi.T @ (w[:, None] * grad_chi)

    conv = np.empty((2 * n, n_u, n_u))
    for j in range(n_u):
        for k in range(n_u):
            conv[:, j, k] = stencils.conv(phi[:, j], phi[:, k])
    turb1 = np.empty((2 * n, n_nut, n_u))
    turb2 = np.empty((2 * n, n_nut, n_u))
    for j in range(n_nut):
        for k in range(n_u):
            turb1[:, j, k] = stencils.turb1(eta[:, j], phi[:, k])
            turb2[:, j, k] = stencils.turb2(eta[:, j], phi[:, k])

    C = _contract(phi, w, conv)
    G = _contract(grad_chi, w, conv)
    C_T1 = _contract(phi, w, turb1)
    C_T2 = _contract(phi, w, turb2)
    C_T3 = _contract(grad_chi, w, turb1)
    C_T4 = _contract(grad_chi, w, turb2)
    N = _wall_operator(stencils, grid, chi, phi)

    top = stencils.top_cells()
    lid_trace = np.vstack([phi[top], phi[n + top]])
    lengths = np.asarray(grid.lid_lengths)
    shape = lid_profile(grid, 1.0, boundary.lid_amplitude)
    weighted_trace = np.concatenate([lengths, lengths])[:, None] * lid_trace
    E = lid_trace.T @ weighted_trace
    D_lid = (lengths * shape) @ phi[top]

    return ReducedOperatorSet(
        M=0.5 * (M + M.T),
        B=B,
        B_T=B_T,
        H=H,
        D=0.5 * (D + D.T),
        N=N,
        C=C,
        G=G,
        C_T1=C_T1,
        C_T2=C_T2,
        C_T3=C_T3,
        C_T4=C_T4,
        L=np.zeros(n_p),
        E_k=(0.5 * (E + E.T),) * len(boundary.values),
        D_k=(D_lid,) * len(boundary.values),
        lid_trace=lid_trace,
        lid_lengths=lengths,
        lid_shape=shape,
        dims=(n_u, n_p, n_nut),
        mu=np.asarray(mu, dtype=np.float64),
    )


def assemble_for_parameter(
    bases: dict[str, PodBasis],
    mu_g: Sequence[float],
    boundary: BoundarySpec,
    grid_config: GridConfig,
    dims: Dims | None = None,
) -> ReducedOperatorSet:
    """Assemble on the grid deformed by ``mu_g`` with the shared mid-configuration modes.

    Reference and physical grids share the cell layout, so mode values carry over
    cell by cell; only the quadrature weights and the stencils change.
    """
    grid = build_grid(
        grid_config.nx,
        grid_config.ny,
        grid_config.lx,
        grid_config.ly,
        tuple(mu_g),
        grid_config.periodic,
        grid_config.deformation_box,
    )
    return assemble(bases["u"], bases["p"], bases["nut"], grid, boundary, dims, mu=mu_g)
