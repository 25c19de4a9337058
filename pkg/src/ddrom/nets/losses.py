from __future__ import annotations

from typing import Literal

import numpy as np

from ddrom.arrays import ArrayModel
from ddrom.closure.extract import ClosureDataset
from ddrom.errors import EmptyDatasetError
from ddrom.nets.operators import DeepONetG, MIONetM

LossKind = Literal["G", "M", "MG", "star"]


class LossBatch(ArrayModel):
    """Normalized training arrays.

    ``jac`` is the eddy-viscosity Jacobian of the closure target in normalized units,
    ``diag(1 / tau_scale) J diag(g_scale)``, so that the target for a predicted
    normalized ``g`` is ``tau - jac (g - g_proj)``.
    """

    a: np.ndarray
    g: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    jac: np.ndarray

    @classmethod
    def from_dataset(
        cls, dataset: ClosureDataset, split: Literal["train", "test", "all"] = "train"
    ) -> "LossBatch":
        data = dataset.split(split)
        norm = dataset.normalization
        jac = data.jac / norm.tau_scale[None, :, None] * norm.g_scale[None, None, :]
        return cls(
            a=norm.normalize("a", data.a),
            g=norm.normalize("g", data.g),
            mu=norm.normalize("mu", data.mu),
            tau=norm.normalize("tau", data.tau),
            jac=jac,
        )

    def __len__(self) -> int:
        return self.a.shape[0]


def _require_samples(batch: LossBatch) -> int:
    if len(batch) == 0:
        raise EmptyDatasetError("loss evaluated on an empty dataset")
    return len(batch)


def _mse(residual: np.ndarray) -> float:
    return float(np.sum(residual**2) / residual.shape[0])


def loss_G(gnet: DeepONetG, batch: LossBatch) -> float:
    _require_samples(batch)
    return _mse(gnet.forward(batch.a, batch.mu) - batch.g)


def loss_M(mnet: MIONetM, batch: LossBatch) -> float:
    _require_samples(batch)
    return _mse(mnet.forward(batch.a, batch.g, batch.mu) - batch.tau)


def coupled_target(batch: LossBatch, g_pred: np.ndarray) -> np.ndarray:
    """Exact correction recomputed with the predicted eddy viscosity (normalized)."""
    return batch.tau - np.einsum("sij,sj->si", batch.jac, g_pred - batch.g)


def loss_MG(mnet: MIONetM, gnet: DeepONetG, batch: LossBatch) -> float:
    _require_samples(batch)
    g_pred = gnet.forward(batch.a, batch.mu)
    return _mse(mnet.forward(batch.a, g_pred, batch.mu) - coupled_target(batch, g_pred))


def loss_star(mnet: MIONetM, gnet: DeepONetG, batch: LossBatch) -> float:
    return loss_M(mnet, batch) + loss_G(gnet, batch) + loss_MG(mnet, gnet, batch)


def loss_value(
    kind: LossKind, batch: LossBatch, gnet: DeepONetG | None = None, mnet: MIONetM | None = None
) -> float:
    if kind == "G":
        return loss_G(gnet, batch)
    if kind == "M":
        return loss_M(mnet, batch)
    if kind == "MG":
        return loss_MG(mnet, gnet, batch)
    return loss_star(mnet, gnet, batch)


def _add(total: list[np.ndarray] | None, grads: list[np.ndarray]) -> list[np.ndarray]:
    return grads if total is None else [t + g for t, g in zip(total, grads)]


def loss_and_gradients(
    kind: LossKind,
    batch: LossBatch,
    gnet: DeepONetG | None = None,
    mnet: MIONetM | None = None,
) -> tuple[float, dict[str, list[np.ndarray] | None]]:
    """Loss value with gradients for every network the loss depends on.

    Returns ``(loss, {"G": grads or None, "M": grads or None})`` with each gradient list
    aligned with the network's ``parameters()``.
    """
    n = _require_samples(batch)
    loss = 0.0
    grads: dict[str, list[np.ndarray] | None] = {"G": None, "M": None}

    if kind in ("G", "star"):
        g_pred, cache = gnet.forward_cache(batch.a, batch.mu)
        r = g_pred - batch.g
        loss += _mse(r)
        grads["G"] = _add(grads["G"], gnet.backward(cache, 2.0 * r / n))

    if kind in ("M", "star"):
        tau_pred, cache = mnet.forward_cache(batch.a, batch.g, batch.mu)
        r = tau_pred - batch.tau
        loss += _mse(r)
        grads["M"] = _add(grads["M"], mnet.backward(cache, 2.0 * r / n)[0])

    if kind in ("MG", "star"):
        g_pred, g_cache = gnet.forward_cache(batch.a, batch.mu)
        tau_pred, m_cache = mnet.forward_cache(batch.a, g_pred, batch.mu)
        r = tau_pred - coupled_target(batch, g_pred)
        loss += _mse(r)
        d_tau = 2.0 * r / n
        m_grads, d_g = mnet.backward(m_cache, d_tau)
        # the target depends on g_pred as well: d target / d g = -jac
        d_g = d_g + np.einsum("sij,si->sj", batch.jac, d_tau)
        grads["M"] = _add(grads["M"], m_grads)
        grads["G"] = _add(grads["G"], gnet.backward(g_cache, d_g))

    return loss, grads
