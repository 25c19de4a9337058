from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ddrom.arrays import ArrayModel
from ddrom.errors import GridError


class GridSpec(ArrayModel):
    """Structured cell-centred grid, flattened row-major as ``j * nx + i``.

    Columns are periodic in x. The y-coordinate of column ``i`` is stretched by
    ``1 + sum_k mu_k sin^2(k pi x / lx)``, so every cell in a column shares the same
    height and the mapped quadrilaterals are trapezoids.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    deformation: tuple[float, ...]
    periodic: bool
    cell_areas: np.ndarray
    heights: np.ndarray
    centres: np.ndarray
    lid_midpoints: np.ndarray
    lid_lengths: np.ndarray
    lid_normals: np.ndarray

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def domain_area(self) -> float:
        return float(self.cell_areas.sum())

    def column_of(self) -> np.ndarray:
        return np.tile(np.arange(self.nx), self.ny)

    def to_manifest(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "lx": self.lx,
            "ly": self.ly,
            "deformation": list(self.deformation),
            "periodic": self.periodic,
        }


def deformation_profile(x: np.ndarray, deformation: Sequence[float], lx: float) -> np.ndarray:
    profile = np.zeros_like(x, dtype=np.float64)
    for k, mu in enumerate(deformation, start=1):
        profile = profile + mu * np.sin(k * np.pi * x / lx) ** 2
    return profile


def build_grid(
    nx: int,
    ny: int,
    lx: float,
    ly: float,
    deformation: Sequence[float] = (),
    periodic: bool = False,
    deformation_box: float = 0.3,
) -> GridSpec:
    if nx < 4 or ny < 4:
        raise GridError(f"Grid needs at least 4x4 cells, got {nx}x{ny}")
    if lx <= 0 or ly <= 0:
        raise GridError(f"Domain extents must be positive, got ({lx}, {ly})")
    deformation = tuple(float(mu) for mu in deformation)
    outside = [mu for mu in deformation if abs(mu) > deformation_box]
    if outside:
        raise GridError(
            f"Deformation {deformation} leaves the admissible box |mu| <= {deformation_box}"
        )

    dx = lx / nx
    x_faces = np.arange(nx + 1) * dx
    stretch = 1.0 + deformation_profile(x_faces, deformation, lx)
    stretch[-1] = stretch[0]

    heights = (ly / ny) * 0.5 * (stretch[:-1] + stretch[1:])
    if np.any(heights <= 0):
        bad = int(np.argmin(heights))
        raise GridError(
            f"Deformation {deformation} produces non-positive cell areas in column {bad}"
        )
    cell_areas = np.tile(dx * heights, ny)

    xc = (np.arange(nx) + 0.5) * dx
    rows = np.arange(ny) + 0.5
    centres = np.column_stack(
        [np.tile(xc, ny), (rows[:, None] * heights[None, :]).ravel()]
    )

    top = ly * stretch
    tangent = np.column_stack([np.full(nx, dx), top[1:] - top[:-1]])
    lid_lengths = np.linalg.norm(tangent, axis=1)
    lid_normals = np.column_stack([-tangent[:, 1], tangent[:, 0]]) / lid_lengths[:, None]
    lid_midpoints = np.column_stack([xc, 0.5 * (top[:-1] + top[1:])])

    return GridSpec(
        nx=nx,
        ny=ny,
        lx=float(lx),
        ly=float(ly),
        deformation=deformation,
        periodic=periodic,
        cell_areas=cell_areas,
        heights=heights,
        centres=centres,
        lid_midpoints=lid_midpoints,
        lid_lengths=lid_lengths,
        lid_normals=lid_normals,
    )


def exact_domain_area(lx: float, ly: float, deformation: Sequence[float]) -> float:
    return lx * ly * (1.0 + 0.5 * float(np.sum(deformation)))
