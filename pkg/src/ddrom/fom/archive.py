from __future__ import annotations

from pathlib import Path

import numpy as np

from ddrom.config import CaseConfig
from ddrom.errors import ArchiveFormatError
from ddrom.fom.fields import FieldFrame, SnapshotSet
from ddrom.fom.harness import reference_grid
from ddrom.io import FRAME_MAGIC, read_floats, read_manifest, split_blocks, write_blocks, write_manifest


def _frame_name(index: int) -> str:
    return f"frame_{index:05d}.bin"


def save_snapshots(snapshots: SnapshotSet, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n_mu = snapshots.frames[0].mu.size if snapshots.frames else 0
    for index, frame in enumerate(snapshots.frames):
        write_blocks(
            directory / _frame_name(index),
            FRAME_MAGIC,
            [frame.u, frame.p, frame.nut, np.array([frame.t]), frame.mu],
        )
    write_manifest(
        directory,
        {
            "kind": "snapshots",
            "grid": snapshots.grid.to_manifest(),
            "params": [list(p) for p in snapshots.params],
            "stride": snapshots.config.stride,
            "snapshot_kind": snapshots.kind,
            "seed": snapshots.config.seed,
            "n_frames": len(snapshots.frames),
            "n_mu": n_mu,
            "case": snapshots.config.model_dump(mode="json"),
        },
    )
    return directory


def load_snapshots(directory: str | Path) -> SnapshotSet:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "snapshots":
        raise ArchiveFormatError(f"{directory} is not a snapshot archive")
    config = CaseConfig.model_validate(manifest["case"])
    grid = reference_grid(config)
    n = grid.n_cells
    n_mu = manifest["n_mu"]
    sizes = [2 * n, n, n, 1, n_mu]

    frames = []
    for index in range(manifest["n_frames"]):
        values = read_floats(directory / _frame_name(index), FRAME_MAGIC, sum(sizes))
        u, p, nut, t, mu = split_blocks(values, sizes)
        frames.append(FieldFrame(u=u, p=p, nut=nut, t=float(t[0]), mu=mu))
    return SnapshotSet(
        grid=grid,
        frames=tuple(frames),
        params=tuple(tuple(p) for p in manifest["params"]),
        kind=manifest["snapshot_kind"],
        config=config,
    )
