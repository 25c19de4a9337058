from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ddrom.errors import DimensionMismatchError
from ddrom.nets.dense import DenseNet


class _OperatorNet:
    """Sub-networks whose outputs are concatenated and fed to a reduction network."""

    architecture = ""
    input_names: tuple[str, ...] = ()

    def __init__(self, subnets: dict[str, DenseNet], reduction: DenseNet, trained_epochs: int = 0):
        if set(subnets) != set(self.input_names):
            raise DimensionMismatchError(f"{self.architecture} needs sub-networks {self.input_names}")
        latent = sum(subnets[name].widths[-1] for name in self.input_names)
        if reduction.widths[0] != latent:
            raise DimensionMismatchError(
                f"reduction input width {reduction.widths[0]} != concatenated width {latent}"
            )
        self.subnets = subnets
        self.reduction = reduction
        self.trained_epochs = trained_epochs

    @property
    def networks(self) -> dict[str, DenseNet]:
        return {**{name: self.subnets[name] for name in self.input_names}, "reduction": self.reduction}

    def parameters(self) -> list[np.ndarray]:
        return [p for net in self.networks.values() for p in net.parameters()]

    def named_parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for name, net in self.networks.items():
            for i, p in enumerate(net.parameters()):
                out[f"{name}.{i}"] = p
        return out

    def copy(self):
        return type(self)(
            {name: net.copy() for name, net in self.subnets.items()},
            self.reduction.copy(),
            self.trained_epochs,
        )

    def _forward_cache(self, inputs: Sequence[np.ndarray]):
        caches, outputs = {}, []
        for name, x in zip(self.input_names, inputs):
            y, caches[name] = self.subnets[name].forward_cache(x)
            outputs.append(y)
        y, caches["reduction"] = self.reduction.forward_cache(np.hstack(outputs))
        return y, caches

    def _backward(self, caches, grad_out: np.ndarray) -> tuple[list[np.ndarray], dict[str, np.ndarray]]:
        red_grads, grad_cat = self.reduction.backward(caches["reduction"], grad_out)
        grads: dict[str, list[np.ndarray]] = {"reduction": red_grads}
        input_grads = {}
        start = 0
        for name in self.input_names:
            width = self.subnets[name].widths[-1]
            grads[name], input_grads[name] = self.subnets[name].backward(
                caches[name], grad_cat[:, start : start + width]
            )
            start += width
        return [g for name in self.networks for g in grads[name]], input_grads


class DeepONetG(_OperatorNet):
    """Eddy-viscosity map ``g = R([B(a), T(mu)])``."""

    architecture = "deeponet-g"
    input_names = ("branch", "trunk")

    @classmethod
    def create(
        cls,
        n_u: int,
        n_mu: int,
        n_nut: int,
        hidden: Sequence[int],
        latent: int,
        rng: np.random.Generator,
    ) -> "DeepONetG":
        hidden = list(hidden)
        return cls(
            {
                "branch": DenseNet.create([n_u, *hidden, latent], rng),
                "trunk": DenseNet.create([n_mu, *hidden, latent], rng),
            },
            DenseNet.create([2 * latent, *hidden, n_nut], rng),
        )

    def forward(self, a: np.ndarray, mu: np.ndarray) -> np.ndarray:
        return self._forward_cache((a, mu))[0]

    def forward_cache(self, a: np.ndarray, mu: np.ndarray):
        return self._forward_cache((a, mu))

    def backward(self, cache, grad_g: np.ndarray) -> list[np.ndarray]:
        return self._backward(cache, grad_g)[0]


class MIONetM(_OperatorNet):
    """Closure map ``tau = R([B1(a), B2(g), T(mu)])``; output splits as ``(tau_u, tau_p)``."""

    architecture = "mionet-m"
    input_names = ("branch_a", "branch_g", "trunk")

    @classmethod
    def create(
        cls,
        n_u: int,
        n_nut: int,
        n_mu: int,
        n_p: int,
        hidden: Sequence[int],
        latent: int,
        rng: np.random.Generator,
    ) -> "MIONetM":
        hidden = list(hidden)
        return cls(
            {
                "branch_a": DenseNet.create([n_u, *hidden, latent], rng),
                "branch_g": DenseNet.create([n_nut, *hidden, latent], rng),
                "trunk": DenseNet.create([n_mu, *hidden, latent], rng),
            },
            DenseNet.create([3 * latent, *hidden, n_u + n_p], rng),
        )

    def forward(self, a: np.ndarray, g: np.ndarray, mu: np.ndarray) -> np.ndarray:
        return self._forward_cache((a, g, mu))[0]

    def forward_cache(self, a: np.ndarray, g: np.ndarray, mu: np.ndarray):
        return self._forward_cache((a, g, mu))

    def backward(self, cache, grad_tau: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Parameter gradients and the gradient w.r.t. the eddy-viscosity input."""
        grads, inputs = self._backward(cache, grad_tau)
        return grads, inputs["branch_g"]
