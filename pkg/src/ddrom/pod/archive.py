from __future__ import annotations

from pathlib import Path

from ddrom.errors import ArchiveFormatError
from ddrom.io import FRAME_MAGIC, read_floats, read_manifest, write_blocks, write_manifest
from ddrom.pod.basis import InnerProduct, PodBasis


def save_basis(basis: PodBasis, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    # one frame-layout block per mode
    write_blocks(directory / "modes.bin", FRAME_MAGIC, list(basis.modes.T))
    write_blocks(directory / "weights.bin", FRAME_MAGIC, [basis.inner_product.weights])
    write_manifest(
        directory,
        {
            "kind": "pod-basis",
            "field_kind": basis.field_kind,
            "rank": basis.rank,
            "n_dof": basis.modes.shape[0],
            "eigenvalues": basis.eigenvalues.tolist(),
            "inner_product_checksum": basis.inner_product.checksum(),
            "mean_subtracted": basis.mean_subtracted,
        },
    )
    return directory


def load_basis(directory: str | Path) -> PodBasis:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("kind") != "pod-basis":
        raise ArchiveFormatError(f"{directory} is not a POD basis archive")
    n_dof, rank = manifest["n_dof"], manifest["rank"]
    weights = read_floats(directory / "weights.bin", FRAME_MAGIC, n_dof)
    ip = InnerProduct(weights=weights)
    if ip.checksum() != manifest["inner_product_checksum"]:
        raise ArchiveFormatError(f"{directory}: inner-product checksum mismatch")
    modes = read_floats(directory / "modes.bin", FRAME_MAGIC, n_dof * rank)
    return PodBasis(
        modes=modes.reshape(rank, n_dof).T,
        eigenvalues=manifest["eigenvalues"],
        field_kind=manifest["field_kind"],
        inner_product=ip,
        mean_subtracted=manifest["mean_subtracted"],
    )


def save_bases(bases: dict[str, PodBasis], directory: str | Path) -> Path:
    directory = Path(directory)
    for kind, basis in bases.items():
        save_basis(basis, directory / kind)
    return directory


def load_bases(directory: str | Path) -> dict[str, PodBasis]:
    directory = Path(directory)
    return {kind: load_basis(directory / kind) for kind in ("u", "p", "nut")}
