from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import model_validator

from ddrom.arrays import ArrayModel
from ddrom.config import CaseConfig
from ddrom.errors import DimensionMismatchError
from ddrom.fom.grid import GridSpec, build_grid

FieldKind = Literal["u", "p", "nut"]
SnapshotKind = Literal["steady", "unsteady", "steady-with-intermediates"]


class FieldFrame(ArrayModel):
    u: np.ndarray
    p: np.ndarray
    nut: np.ndarray
    t: float
    mu: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "FieldFrame":
        n = self.p.size
        if self.u.size != 2 * n or self.nut.size != n:
            raise DimensionMismatchError(
                f"Frame arrays disagree: u {self.u.size}, p {self.p.size}, nut {self.nut.size}"
            )
        if np.any(self.nut < 0):
            raise ValueError("Eddy viscosity must be non-negative")
        return self

    def field(self, kind: FieldKind) -> np.ndarray:
        return {"u": self.u, "p": self.p, "nut": self.nut}[kind]

    @classmethod
    def zeros(cls, n_cells: int, mu: np.ndarray, t: float = 0.0) -> "FieldFrame":
        return cls(
            u=np.zeros(2 * n_cells), p=np.zeros(n_cells), nut=np.zeros(n_cells), t=t, mu=mu
        )


class SnapshotSet(ArrayModel):
    """Frames grouped by parameter and time-ordered within each group.

    ``grid`` is the reference grid every frame is laid out on: the undeformed grid
    for the unsteady family, the mid-configuration grid for the deformed family.
    """

    grid: GridSpec
    frames: tuple[FieldFrame, ...]
    params: tuple[tuple[float, ...], ...]
    kind: SnapshotKind
    config: CaseConfig

    @model_validator(mode="after")
    def _check(self) -> "SnapshotSet":
        for frame in self.frames:
            if frame.p.size != self.grid.n_cells:
                raise DimensionMismatchError(
                    f"Frame with {frame.p.size} cells on a grid of {self.grid.n_cells}"
                )
        return self

    def __len__(self) -> int:
        return len(self.frames)

    def group_index(self, frame: FieldFrame) -> int:
        if self.config.family == "unsteady-channel":
            key = (float(frame.mu[0]),)
        else:
            key = tuple(float(v) for v in frame.mu)
        return self.params.index(key)

    def groups(self) -> list[list[FieldFrame]]:
        out: list[list[FieldFrame]] = [[] for _ in self.params]
        for frame in self.frames:
            out[self.group_index(frame)].append(frame)
        return out

    def matrix(self, kind: FieldKind) -> np.ndarray:
        """Snapshot matrix, one frame per column."""
        if not self.frames:
            raise DimensionMismatchError("Snapshot set has no frames")
        return np.column_stack([frame.field(kind) for frame in self.frames])

    def grid_for(self, param: tuple[float, ...]) -> GridSpec:
        grid = self.config.grid
        if self.config.family == "steady-deformed":
            return build_grid(
                grid.nx, grid.ny, grid.lx, grid.ly, param, grid.periodic, grid.deformation_box
            )
        return build_grid(grid.nx, grid.ny, grid.lx, grid.ly, (), grid.periodic, grid.deformation_box)

    def viscosity_for(self, param: tuple[float, ...]) -> float:
        if self.config.family == "unsteady-channel":
            return float(param[0])
        return self.config.nu
