from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.special import expit

from ddrom.errors import DimensionMismatchError


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_grad(x: np.ndarray) -> np.ndarray:
    return expit(x)


class DenseNet:
    """Fully connected net: Softplus on hidden layers, identity on the output layer.

    ``weights[l]`` has shape ``(fan_in, fan_out)`` and inputs are batches of row vectors.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise DimensionMismatchError("one bias per weight matrix is required")
        for W, b, W_next in zip(weights, biases, list(weights[1:]) + [None]):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise DimensionMismatchError(f"bias {b.shape} does not match weight {W.shape}")
            if W_next is not None and W_next.shape[0] != W.shape[1]:
                raise DimensionMismatchError(
                    f"layer widths {W.shape} and {W_next.shape} are not compatible"
                )
        self.weights = [np.array(W, dtype=np.float64) for W in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]

    @classmethod
    def create(cls, widths: Sequence[int], rng: np.random.Generator) -> "DenseNet":
        """Uniform fan-in scaled initialization, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, fan_out))
        return cls(weights, biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.widths[0]:
            raise DimensionMismatchError(
                f"input width {x.shape[1]} does not match layer width {self.widths[0]}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_cache(x)[0]

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        h = self._check_input(x)
        cache = []
        last = len(self.weights) - 1
        for layer, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            cache.append((h, z))
            h = z if layer == last else softplus(z)
        return h, cache

    def backward(
        self, cache: list[tuple[np.ndarray, np.ndarray]], grad_out: np.ndarray
    ) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients aligned with :meth:`parameters` and the gradient w.r.t. the input."""
        grads: list[np.ndarray] = []
        delta = grad_out
        last = len(self.weights) - 1
        for layer in range(last, -1, -1):
            h, z = cache[layer]
            if layer != last:
                delta = delta * softplus_grad(z)
            grads = [h.T @ delta, delta.sum(axis=0)] + grads
            delta = delta @ self.weights[layer].T
        return grads, delta
