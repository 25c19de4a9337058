from __future__ import annotations

from collections.abc import Callable

import numpy as np

from ddrom.nets.dense import DenseNet
from ddrom.nets.losses import LossBatch, LossKind, loss_and_gradients, loss_value
from ddrom.nets.operators import DeepONetG, MIONetM


def _check_eps(eps: float) -> None:
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"finite-difference step must lie in [1e-7, 1e-4], got {eps}")


def _max_deviation(
    params: list[np.ndarray], analytic: list[np.ndarray], loss: Callable[[], float], eps: float
) -> float:
    """Central differences on every entry of ``params`` against ``analytic``."""
    numeric = []
    for param in params:
        grad = np.zeros_like(param)
        flat, out = param.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            plus = loss()
            flat[i] = saved - eps
            minus = loss()
            flat[i] = saved
            out[i] = (plus - minus) / (2.0 * eps)
        numeric.append(grad)
    num = np.concatenate([g.ravel() for g in numeric])
    ana = np.concatenate([g.ravel() for g in analytic])
    scale = max(np.abs(num).max(initial=0.0), np.abs(ana).max(initial=0.0), 1e-12)
    return float(np.abs(num - ana).max(initial=0.0) / scale)


def grad_check(
    kind: LossKind,
    batch: LossBatch,
    gnet: DeepONetG | None = None,
    mnet: MIONetM | None = None,
    eps: float = 1e-6,
) -> float:
    """Max relative deviation between backprop and central differences for one loss."""
    _check_eps(eps)
    _, grads = loss_and_gradients(kind, batch, gnet, mnet)
    params, analytic = [], []
    for net, key in ((gnet, "G"), (mnet, "M")):
        if grads[key] is not None:
            params += net.parameters()
            analytic += grads[key]
    return _max_deviation(params, analytic, lambda: loss_value(kind, batch, gnet, mnet), eps)


def grad_check_dense(net: DenseNet, x: np.ndarray, y: np.ndarray, eps: float = 1e-6) -> float:
    """Same check for a bare dense net under the mean squared error against ``y``."""
    _check_eps(eps)
    n = x.shape[0]
    out, cache = net.forward_cache(x)
    analytic, _ = net.backward(cache, 2.0 * (out - y) / n)

    def loss() -> float:
        return float(np.sum((net.forward(x) - y) ** 2) / n)

    return _max_deviation(net.parameters(), analytic, loss, eps)
