from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ddrom.fom.grid import GridSpec


def lid_profile(grid: GridSpec, lid_velocity: float, lid_amplitude: float = 0.5) -> np.ndarray:
    """Tangential lid velocity per top edge, ``U (1 + A sin(2 pi x / lx))``."""
    if grid.periodic:
        return np.zeros(grid.nx)
    x = grid.lid_midpoints[:, 0]
    return lid_velocity * (1.0 + lid_amplitude * np.sin(2.0 * np.pi * x / grid.lx))


class _Triplets:
    def __init__(self, n: int):
        self.n = n
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.data: list[float] = []

    def add(self, row: int, col: int, value: float) -> None:
        self.rows.append(row)
        self.cols.append(col)
        self.data.append(value)

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, (self.rows, self.cols)), shape=(self.n, self.n))


class Stencils:
    """Sparse finite-difference operators shared by the FOM and Galerkin assembly.

    Velocity vectors stack the x-component block before the y-component block.
    ``dy_wall`` and ``lap_wall`` close the walls with an antisymmetric ghost
    (homogeneous Dirichlet); ``dy_flux`` and ``lap_flux`` with a symmetric ghost
    (zero normal gradient). Non-homogeneous lid data enters only through the lift
    vectors, so every matrix here is the homogeneous part of the FOM operator.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.n = grid.n_cells
        self.areas = np.asarray(grid.cell_areas)
        self.velocity_weights = np.tile(self.areas, 2)

        self.dx_op = self._dx()
        self.dy_wall = self._dy(ghost=-1.0)
        self.dy_flux = self._dy(ghost=1.0)
        self.lap_wall = self._laplacian(ghost=-1.0)
        self.lap_flux = self._laplacian(ghost=1.0)

        self.lap_v = sp.block_diag([self.lap_wall, self.lap_wall], format="csr")
        self.grad = sp.vstack([self.dx_op, self.dy_flux], format="csr")
        self.div_v = sp.hstack([self.dx_op, self.dy_wall], format="csr")
        self.div_f = sp.hstack([self.dx_op, self.dy_flux], format="csr")
        self.grad_div = (self.grad @ self.div_v).tocsr()

        self._implicit: dict[tuple[float, float], object] = {}
        self._pinned = None

    def _index(self, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return j * self.grid.nx + i

    def _dx(self) -> sp.csr_matrix:
        nx, ny = self.grid.nx, self.grid.ny
        i, j = np.meshgrid(np.arange(nx), np.arange(ny))
        i, j = i.ravel(), j.ravel()
        rows = self._index(i, j)
        coef = 1.0 / (2.0 * self.grid.dx)
        data = np.concatenate([np.full(rows.size, coef), np.full(rows.size, -coef)])
        cols = np.concatenate(
            [self._index((i + 1) % nx, j), self._index((i - 1) % nx, j)]
        )
        return sp.csr_matrix(
            (data, (np.concatenate([rows, rows]), cols)), shape=(self.n, self.n)
        )

    def _dy(self, ghost: float) -> sp.csr_matrix:
        nx, ny = self.grid.nx, self.grid.ny
        h = np.asarray(self.grid.heights)
        entries = _Triplets(self.n)
        for j in range(ny):
            for i in range(nx):
                row = j * nx + i
                coef = 1.0 / (2.0 * h[i])
                for jj, sign in ((j + 1, 1.0), (j - 1, -1.0)):
                    if self.grid.periodic or 0 <= jj < ny:
                        entries.add(row, (jj % ny) * nx + i, sign * coef)
                    else:
                        # wall ghost value is ghost * f
                        entries.add(row, row, sign * ghost * coef)
        return entries.matrix()

    def _laplacian(self, ghost: float) -> sp.csr_matrix:
        """Finite-volume Laplacian; ``diag(areas) @ lap`` is symmetric."""
        nx, ny = self.grid.nx, self.grid.ny
        dx = self.grid.dx
        h = np.asarray(self.grid.heights)
        entries = _Triplets(self.n)
        for j in range(ny):
            for i in range(nx):
                row = j * nx + i
                area = dx * h[i]
                diag = 0.0
                for ii in ((i + 1) % nx, (i - 1) % nx):
                    cx = 0.5 * (h[i] + h[ii]) / dx / area
                    entries.add(row, j * nx + ii, cx)
                    diag -= cx
                cy = dx / h[i] / area
                for jj in (j + 1, j - 1):
                    if self.grid.periodic or 0 <= jj < ny:
                        entries.add(row, (jj % ny) * nx + i, cy)
                        diag -= cy
                    else:
                        diag += cy * (ghost - 1.0)
                entries.add(row, row, diag)
        return entries.matrix()

    def top_cells(self) -> np.ndarray:
        return (self.grid.ny - 1) * self.grid.nx + np.arange(self.grid.nx)

    def dy_lift(self, lid: np.ndarray | None) -> np.ndarray:
        """Lid contribution of ``dy_wall`` applied to the x-velocity."""
        out = np.zeros(self.n)
        if lid is not None and not self.grid.periodic:
            out[self.top_cells()] = lid / np.asarray(self.grid.heights)
        return out

    def lap_lift(self, lid: np.ndarray | None) -> np.ndarray:
        out = np.zeros(self.n)
        if lid is not None and not self.grid.periodic:
            h = np.asarray(self.grid.heights)
            out[self.top_cells()] = 2.0 * (self.grid.dx / h) * lid / (self.grid.dx * h)
        return out

    def lap_v_lift(self, lid: np.ndarray | None) -> np.ndarray:
        return np.concatenate([self.lap_lift(lid), np.zeros(self.n)])

    def split(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return u[: self.n], u[self.n :]

    def conv(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Discrete ``div(b (x) a)``: bilinear, transported field ``b``."""
        ax, ay = self.split(a)
        bx, by = self.split(b)
        return np.concatenate(
            [
                self.dx_op @ (ax * bx) + self.dy_wall @ (ay * bx),
                self.dx_op @ (ax * by) + self.dy_wall @ (ay * by),
            ]
        )

    def turb1(self, eta: np.ndarray, u: np.ndarray, lid: np.ndarray | None = None) -> np.ndarray:
        """``eta * lap(u)`` per component."""
        lap = self.lap_v @ u
        if lid is not None:
            lap = lap + self.lap_v_lift(lid)
        return np.tile(eta, 2) * lap

    def turb2(self, eta: np.ndarray, u: np.ndarray, lid: np.ndarray | None = None) -> np.ndarray:
        """``div(eta grad(u)^T)``."""
        ux, uy = self.split(u)
        dux_dy = self.dy_wall @ ux
        if lid is not None:
            dux_dy = dux_dy + self.dy_lift(lid)
        return np.concatenate(
            [
                self.dx_op @ (eta * (self.dx_op @ ux)) + self.dy_flux @ (eta * (self.dx_op @ uy)),
                self.dx_op @ (eta * dux_dy) + self.dy_flux @ (eta * (self.dy_wall @ uy)),
            ]
        )

    def strain_norm(self, u: np.ndarray, lid: np.ndarray | None = None) -> np.ndarray:
        """Frobenius norm of ``grad(u) + grad(u)^T`` per cell."""
        ux, uy = self.split(u)
        dux_dx = self.dx_op @ ux
        duy_dx = self.dx_op @ uy
        dux_dy = self.dy_wall @ ux
        if lid is not None:
            dux_dy = dux_dy + self.dy_lift(lid)
        duy_dy = self.dy_wall @ uy
        s_xy = duy_dx + dux_dy
        return np.sqrt(4.0 * dux_dx**2 + 4.0 * duy_dy**2 + 2.0 * s_xy**2)

    def implicit_solver(self, nu: float, dt: float):
        """LU factor of ``I - dt nu (lap_v + grad_div)``, cached per (nu, dt)."""
        key = (float(nu), float(dt))
        if key not in self._implicit:
            system = sp.identity(2 * self.n, format="csc") - dt * nu * (
                self.lap_v + self.grad_div
            )
            self._implicit[key] = splu(system.tocsc())
        return self._implicit[key]

    def pinned_laplacian(self) -> sp.csc_matrix:
        """Neumann Laplacian with its first row replaced by ``p_0 = 0``."""
        if self._pinned is None:
            pinned = self.lap_flux.tolil(copy=True)
            pinned[0, :] = 0.0
            pinned[0, 0] = 1.0
            self._pinned = pinned.tocsc()
        return self._pinned
