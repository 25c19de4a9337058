from __future__ import annotations

from pathlib import Path

import numpy as np

from ddrom.closure.ansatz import QuadraticAnsatz
from ddrom.closure.extract import ClosureDataset, Normalization
from ddrom.errors import ArchiveFormatError
from ddrom.io import (
    DATASET_MAGIC,
    FRAME_MAGIC,
    array_checksum,
    read_floats,
    read_manifest,
    write_blocks,
    write_manifest,
)


def dataset_checksum(dataset: ClosureDataset) -> str:
    return array_checksum(np.hstack([dataset.a, dataset.g, dataset.mu, dataset.tau]))


def save_dataset(dataset: ClosureDataset, directory: str | Path) -> Path:
    """``samples.bin`` holds one ``a | g | mu | tau`` record per sample, ``jac.bin`` the g-Jacobians."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = np.hstack([dataset.a, dataset.g, dataset.mu, dataset.tau])
    write_blocks(directory / "samples.bin", DATASET_MAGIC, [records.ravel()])
    write_blocks(directory / "jac.bin", DATASET_MAGIC, [dataset.jac.ravel()])
    write_manifest(
        directory,
        {
            "kind": "closure-dataset",
            "snapshot_kind": dataset.kind,
            "dims": list(dataset.dims),
            "big_dims": list(dataset.big_dims),
            "n_samples": len(dataset),
            "n_mu": dataset.mu.shape[1],
            "with_turbulence": dataset.with_turbulence,
            "groups": list(dataset.groups),
            "is_train": list(dataset.is_train),
            "normalization": {k: v.tolist() for k, v in dataset.normalization},
            "checksum": dataset_checksum(dataset),
        },
    )
    return directory


def load_dataset(directory: str | Path) -> ClosureDataset:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "closure-dataset":
        raise ArchiveFormatError(f"{directory} is not a closure dataset archive")
    n_u, n_p, n_nut = manifest["dims"]
    s, n_mu = manifest["n_samples"], manifest["n_mu"]
    width = n_u + n_nut + n_mu + n_u + n_p
    records = read_floats(directory / "samples.bin", DATASET_MAGIC, s * width).reshape(s, width)
    jac = read_floats(directory / "jac.bin", DATASET_MAGIC, s * (n_u + n_p) * n_nut)
    cuts = np.cumsum([n_u, n_nut, n_mu])
    a, g, mu, tau = np.split(records, cuts, axis=1)
    return ClosureDataset(
        a=a,
        g=g,
        mu=mu,
        tau=tau,
        jac=jac.reshape(s, n_u + n_p, n_nut),
        groups=tuple(manifest["groups"]),
        is_train=tuple(manifest["is_train"]),
        dims=(n_u, n_p, n_nut),
        big_dims=tuple(manifest["big_dims"]),
        kind=manifest["snapshot_kind"],
        with_turbulence=manifest["with_turbulence"],
        normalization=Normalization(**manifest["normalization"]),
    )


def save_ansatz(qa: QuadraticAnsatz, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_blocks(directory / "ansatz.bin", FRAME_MAGIC, [qa.A_tilde.ravel(), qa.B_tilde.ravel()])
    write_manifest(
        directory,
        {
            "kind": "quadratic-ansatz",
            "n_u": qa.n_u,
            "n_p": qa.n_p,
            # the operators act on the zero-padded state (a, 0)
            "padded_state": True,
            "underdetermined": qa.underdetermined,
        },
    )
    return directory


def load_ansatz(directory: str | Path) -> QuadraticAnsatz:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "quadratic-ansatz":
        raise ArchiveFormatError(f"{directory} is not a quadratic ansatz archive")
    n = manifest["n_u"] + manifest["n_p"]
    values = read_floats(directory / "ansatz.bin", FRAME_MAGIC, n * n + n**3)
    return QuadraticAnsatz(
        A_tilde=values[: n * n].reshape(n, n),
        B_tilde=values[n * n :].reshape(n, n, n),
        n_u=manifest["n_u"],
        n_p=manifest["n_p"],
        underdetermined=manifest["underdetermined"],
    )
