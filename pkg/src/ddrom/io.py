from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from ddrom.errors import ArchiveFormatError

FORMAT_VERSION = "1"

FRAME_MAGIC = b"ROMS"
WEIGHTS_MAGIC = b"ROMW"
DATASET_MAGIC = b"ROMD"
TRAJECTORY_MAGIC = b"ROMT"

_LE_FLOAT = np.dtype("<f8")


def write_blocks(path: Path, magic: bytes, blocks: list[np.ndarray]) -> None:
    payload = b"".join(np.ascontiguousarray(b, dtype=_LE_FLOAT).tobytes() for b in blocks)
    path.write_bytes(magic + payload)


def read_floats(path: Path, magic: bytes, expected: int | None = None) -> np.ndarray:
    data = path.read_bytes()
    if data[:4] != magic:
        raise ArchiveFormatError(
            f"{path.name}: bad magic bytes {data[:4]!r}, expected {magic!r}"
        )
    body = data[4:]
    if len(body) % _LE_FLOAT.itemsize:
        raise ArchiveFormatError(f"{path.name}: truncated float64 payload")
    values = np.frombuffer(body, dtype=_LE_FLOAT).astype(np.float64)
    if expected is not None and values.size != expected:
        raise ArchiveFormatError(
            f"{path.name}: expected {expected} values, found {values.size}"
        )
    return values


def split_blocks(values: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    if sum(sizes) != values.size:
        raise ArchiveFormatError(
            f"Block sizes {sizes} do not match payload of {values.size} values"
        )
    out, start = [], 0
    for size in sizes:
        out.append(values[start : start + size].copy())
        start += size
    return out


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_manifest(directory: Path, manifest: dict[str, Any]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": FORMAT_VERSION, **manifest}
    (directory / "manifest.json").write_text(dump_json(manifest))


def read_manifest(directory: Path) -> dict[str, Any]:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found at {path}")
    manifest = json.loads(path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError(
            f"{path}: unsupported format version {version!r}, expected {FORMAT_VERSION!r}"
        )
    return manifest


def array_checksum(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array, dtype=_LE_FLOAT).tobytes()).hexdigest()


def directory_checksum(directory: Path) -> str:
    digest = hashlib.sha256()
    root = Path(directory)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
