from __future__ import annotations

import numpy as np

from ddrom.closure.extract import Normalization
from ddrom.nets.operators import DeepONetG, MIONetM


class NetworkClosure:
    """Trained networks wrapped in physical units for the ROM solver.

    Inference only reads the network weights, so one instance can be shared by
    concurrent solves.
    """

    def __init__(self, gnet: DeepONetG, normalization: Normalization, mnet: MIONetM | None = None):
        self.gnet = gnet
        self.mnet = mnet
        self.normalization = normalization

    def turbulence(self, a: np.ndarray, mu: np.ndarray) -> np.ndarray:
        norm = self.normalization
        g = self.gnet.forward(norm.normalize("a", a), norm.normalize("mu", mu))
        return norm.denormalize("g", g[0])

    def correction(self, a: np.ndarray, g: np.ndarray, mu: np.ndarray) -> np.ndarray:
        if self.mnet is None:
            return np.zeros(self.normalization.tau_lower.size)
        norm = self.normalization
        tau = self.mnet.forward(
            norm.normalize("a", a), norm.normalize("g", g), norm.normalize("mu", mu)
        )
        return norm.denormalize("tau", tau[0])
