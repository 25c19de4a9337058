from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from ddrom.errors import ArchiveFormatError
from ddrom.io import TRAJECTORY_MAGIC, read_floats, read_manifest, write_blocks, write_manifest
from ddrom.rom.solver import RomTrajectory


def save_trajectory(
    trajectory: RomTrajectory, directory: str | Path, extra: dict[str, Any] | None = None
) -> Path:
    """``trajectory.bin`` holds one ``t | a | b`` record per time node."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = np.hstack([trajectory.times[:, None], trajectory.a, trajectory.b])
    write_blocks(directory / "trajectory.bin", TRAJECTORY_MAGIC, [records.ravel()])
    write_manifest(
        directory,
        {
            "kind": "trajectory",
            "n_u": trajectory.a.shape[1],
            "n_p": trajectory.b.shape[1],
            "n_nodes": trajectory.times.size,
            "mu": trajectory.mu.tolist(),
            "iterations": list(trajectory.iterations),
            "residuals": trajectory.residuals.tolist(),
            "converged": list(trajectory.converged),
            **(extra or {}),
        },
    )
    return directory


def load_trajectory(directory: str | Path) -> RomTrajectory:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "trajectory":
        raise ArchiveFormatError(f"{directory} is not a trajectory archive")
    n_u, n_p, nodes = manifest["n_u"], manifest["n_p"], manifest["n_nodes"]
    width = 1 + n_u + n_p
    records = read_floats(directory / "trajectory.bin", TRAJECTORY_MAGIC, nodes * width)
    records = records.reshape(nodes, width)
    return RomTrajectory(
        times=records[:, 0],
        a=records[:, 1 : 1 + n_u],
        b=records[:, 1 + n_u :],
        iterations=tuple(manifest["iterations"]),
        residuals=np.asarray(manifest["residuals"], dtype=np.float64),
        converged=tuple(manifest["converged"]),
        mu=np.asarray(manifest["mu"], dtype=np.float64),
    )
