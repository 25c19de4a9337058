from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from ddrom.errors import ArchiveFormatError
from ddrom.io import FRAME_MAGIC, read_floats, read_manifest, split_blocks, write_blocks, write_manifest
from ddrom.operators.assembly import BoundarySpec, ReducedOperatorSet

_ARRAYS = (
    "M", "B", "B_T", "H", "D", "N", "C", "G",
    "C_T1", "C_T2", "C_T3", "C_T4", "L",
    "lid_trace", "lid_lengths", "lid_shape", "mu",
)


def save_operators(
    opset: ReducedOperatorSet,
    boundary: BoundarySpec,
    directory: str | Path,
    extra: dict[str, Any] | None = None,
) -> Path:
    """One ``.bin`` per operator plus a manifest recording dims, shapes and the boundary."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name in _ARRAYS:
        array = getattr(opset, name)
        write_blocks(directory / f"{name}.bin", FRAME_MAGIC, [array.ravel()])
        shapes[name] = list(array.shape)
    write_blocks(directory / "E_k.bin", FRAME_MAGIC, [E.ravel() for E in opset.E_k])
    write_blocks(directory / "D_k.bin", FRAME_MAGIC, list(opset.D_k))
    manifest = {
        "kind": "operators",
        "dims": list(opset.dims),
        "n_boundary": len(opset.E_k),
        "shapes": shapes,
        "L_is_zero": opset.L_is_zero,
        "boundary": boundary.model_dump(),
    }
    clash = sorted(set(extra or {}) & set(manifest))
    if clash:
        raise ValueError(f"extra manifest entries {clash} collide with reserved operator keys")
    write_manifest(directory, {**manifest, **(extra or {})})
    return directory


def load_operators(directory: str | Path) -> tuple[ReducedOperatorSet, BoundarySpec]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "operators":
        raise ArchiveFormatError(f"{directory} is not an operator archive")
    values: dict[str, Any] = {}
    for name in _ARRAYS:
        shape = manifest["shapes"][name]
        flat = read_floats(directory / f"{name}.bin", FRAME_MAGIC, int(np.prod(shape)))
        values[name] = flat.reshape(shape)
    n_u, k = manifest["dims"][0], manifest["n_boundary"]
    E = split_blocks(read_floats(directory / "E_k.bin", FRAME_MAGIC), [n_u * n_u] * k)
    D = split_blocks(read_floats(directory / "D_k.bin", FRAME_MAGIC), [n_u] * k)
    opset = ReducedOperatorSet(
        **values,
        E_k=tuple(e.reshape(n_u, n_u) for e in E),
        D_k=tuple(D),
        dims=tuple(manifest["dims"]),
        L_is_zero=manifest["L_is_zero"],
    )
    return opset, BoundarySpec.model_validate(manifest["boundary"])
