from ddrom.nets.closure import NetworkClosure
from ddrom.nets.dense import DenseNet, softplus
from ddrom.nets.gradcheck import grad_check, grad_check_dense
from ddrom.nets.io import load_weights, save_weights
from ddrom.nets.losses import (
    LossBatch,
    loss_and_gradients,
    loss_G,
    loss_M,
    loss_MG,
    loss_star,
)
from ddrom.nets.operators import DeepONetG, MIONetM
from ddrom.nets.training import Adam, TrainReport, learning_rate, train

__all__ = [
    "Adam",
    "DeepONetG",
    "DenseNet",
    "LossBatch",
    "MIONetM",
    "NetworkClosure",
    "TrainReport",
    "grad_check",
    "grad_check_dense",
    "learning_rate",
    "load_weights",
    "loss_G",
    "loss_M",
    "loss_MG",
    "loss_and_gradients",
    "loss_star",
    "save_weights",
    "softplus",
    "train",
]
