from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from ddrom.errors import ArchiveFormatError
from ddrom.io import WEIGHTS_MAGIC, read_floats, read_manifest, split_blocks, write_blocks, write_manifest
from ddrom.nets.dense import DenseNet
from ddrom.nets.operators import DeepONetG, MIONetM

_ARCHITECTURES = {cls.architecture: cls for cls in (DeepONetG, MIONetM)}

OperatorNet = DeepONetG | MIONetM


def save_weights(
    net: OperatorNet, directory: str | Path, extra: dict[str, Any] | None = None
) -> Path:
    """Row-major float64 blob per layer (weights then bias) in ``weights.bin`` plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blocks = [p.ravel() for p in net.parameters()]
    write_blocks(directory / "weights.bin", WEIGHTS_MAGIC, blocks)
    write_manifest(
        directory,
        {
            "kind": "network",
            "architecture": net.architecture,
            "widths": {name: sub.widths for name, sub in net.networks.items()},
            "trained_epochs": net.trained_epochs,
            **(extra or {}),
        },
    )
    return directory


def load_weights(directory: str | Path) -> OperatorNet:
    directory = Path(directory)
    manifest = read_manifest(directory)
    cls = _ARCHITECTURES.get(manifest.get("architecture"))
    if manifest.get("kind") != "network" or cls is None:
        raise ArchiveFormatError(f"{directory} is not a network weight archive")
    widths: dict[str, list[int]] = manifest["widths"]
    order = [*cls.input_names, "reduction"]
    if set(widths) != set(order):
        raise ArchiveFormatError(f"{directory}: sub-networks {sorted(widths)} do not match {cls.architecture}")

    sizes = []
    for name in order:
        w = widths[name]
        for fan_in, fan_out in zip(w[:-1], w[1:]):
            sizes += [fan_in * fan_out, fan_out]
    values = split_blocks(read_floats(directory / "weights.bin", WEIGHTS_MAGIC), sizes)

    nets, cursor = {}, 0
    for name in order:
        w = widths[name]
        weights, biases = [], []
        for fan_in, fan_out in zip(w[:-1], w[1:]):
            weights.append(values[cursor].reshape(fan_in, fan_out))
            biases.append(values[cursor + 1])
            cursor += 2
        nets[name] = DenseNet(weights, biases)
    reduction = nets.pop("reduction")
    return cls(nets, reduction, manifest["trained_epochs"])


def weights_array(net: OperatorNet) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.parameters()])
