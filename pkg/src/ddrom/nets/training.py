from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel
from rich.console import Console
from rich.progress import Progress

from ddrom.closure.extract import ClosureDataset
from ddrom.config import TrainConfig
from ddrom.errors import TrainingDivergedError
from ddrom.nets.losses import LossBatch, LossKind, loss_and_gradients, loss_value
from ddrom.nets.operators import DeepONetG, MIONetM

TrainMode = Literal["standard-G", "standard-M", "coupled-star"]

_LOSS_KIND: dict[str, LossKind] = {"standard-G": "G", "standard-M": "M", "coupled-star": "star"}


class TrainReport(BaseModel):
    mode: TrainMode
    epochs: int
    seed: int
    losses: list[float]
    learning_rates: list[float]
    final_train_loss: float
    final_test_loss: float | None = None

    def running_minimum(self) -> list[float]:
        return np.minimum.accumulate(self.losses).tolist()


def learning_rate(epoch: int, config: TrainConfig) -> float:
    """Step decay: ``lr * gamma ** (epoch // step)``."""
    return config.learning_rate * config.gamma ** (epoch // config.step)


class Adam:
    """Adam on a name-keyed dict of parameter arrays, updated in place."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for key, param in params.items():
            g = grads[key]
            if key not in self.m:
                self.m[key] = np.zeros_like(param)
                self.v[key] = np.zeros_like(param)
            self.m[key] *= self.beta1
            self.m[key] += (1.0 - self.beta1) * g
            self.v[key] *= self.beta2
            self.v[key] += (1.0 - self.beta2) * (g * g)
            param -= (lr / bc1) * self.m[key] / (np.sqrt(self.v[key] / bc2) + self.epsilon)


def _named(prefix: str, net, values: list[np.ndarray]) -> dict[str, np.ndarray]:
    return {f"{prefix}.{name}": v for name, v in zip(net.named_parameters(), values)}


def train(
    dataset: ClosureDataset,
    config: TrainConfig,
    mode: TrainMode,
    gnet: DeepONetG | None = None,
    mnet: MIONetM | None = None,
    console: Console | None = None,
    quiet: bool = False,
) -> TrainReport:
    """Full-batch training of the networks ``mode`` updates, in place.

    Args:
        dataset: closure dataset; the training split drives the updates.
        config: epochs, learning-rate schedule and Adam moments.
        mode: ``standard-G`` fits the eddy-viscosity map, ``standard-M`` the closure map,
            ``coupled-star`` both on the joint loss and needs a pre-trained ``gnet``.
        gnet, mnet: the networks, required by the selected mode.
        console: rich console for progress output.
        quiet: disable the progress display.

    Returns:
        TrainReport with the per-epoch loss and learning rate and the final losses.
    """
    console = console or Console()
    kind = _LOSS_KIND[mode]
    if kind in ("G", "star") and gnet is None:
        raise ValueError(f"{mode} training needs the eddy-viscosity network")
    if kind in ("M", "star") and mnet is None:
        raise ValueError(f"{mode} training needs the closure network")
    if mode == "coupled-star" and gnet.trained_epochs == 0:
        raise ValueError("coupled-star training needs a pre-trained eddy-viscosity network")

    batch = LossBatch.from_dataset(dataset, "train")
    test_batch = LossBatch.from_dataset(dataset, "test")
    epochs = config.coupled_epochs if mode == "coupled-star" else config.epochs

    params: dict[str, np.ndarray] = {}
    if kind in ("G", "star"):
        params.update({f"G.{k}": v for k, v in gnet.named_parameters().items()})
    if kind in ("M", "star"):
        params.update({f"M.{k}": v for k, v in mnet.named_parameters().items()})
    optimizer = Adam(config.beta1, config.beta2, config.eps)

    losses: list[float] = []
    rates: list[float] = []
    with Progress(console=console, disable=quiet) as progress:
        task = progress.add_task(f"[cyan]Training {mode}...", total=epochs)
        for epoch in range(epochs):
            lr = learning_rate(epoch, config)
            loss, grads = loss_and_gradients(kind, batch, gnet, mnet)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            named_grads: dict[str, np.ndarray] = {}
            if grads["G"] is not None:
                named_grads.update(_named("G", gnet, grads["G"]))
            if grads["M"] is not None:
                named_grads.update(_named("M", mnet, grads["M"]))
            optimizer.step(params, named_grads, lr)
            losses.append(loss)
            rates.append(lr)
            if (epoch + 1) % config.log_every == 0 or epoch + 1 == epochs:
                progress.update(task, completed=epoch + 1, description=f"[cyan]{mode} loss {loss:.3e}")

    if kind in ("G", "star"):
        gnet.trained_epochs += epochs
    if kind in ("M", "star"):
        mnet.trained_epochs += epochs

    final_train = loss_value(kind, batch, gnet, mnet)
    final_test = loss_value(kind, test_batch, gnet, mnet) if len(test_batch) else None
    if not quiet:
        test_text = f", test {final_test:.3e}" if final_test is not None else ""
        console.print(f"[green]{mode}: train loss {final_train:.3e}{test_text}[/green]")
    return TrainReport(
        mode=mode,
        epochs=epochs,
        seed=config.seed,
        losses=losses,
        learning_rates=rates,
        final_train_loss=final_train,
        final_test_loss=final_test,
    )
