from __future__ import annotations

import numpy as np


class RomError(Exception):
    pass


class GridError(RomError, ValueError):
    pass


class DimensionMismatchError(RomError, ValueError):
    pass


class ArchiveFormatError(RomError):
    pass


class FomDivergenceError(RomError):
    def __init__(self, message: str, step: int, norm: float):
        super().__init__(f"{message} (step {step}, norm {norm:.3e})")
        self.step = step
        self.norm = norm


class FomConvergenceError(RomError):
    pass


class PressureSolveError(RomError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class PodRankError(RomError, ValueError):
    def __init__(self, requested: int, achievable: int):
        super().__init__(
            f"Requested rank {requested} exceeds the numerical rank; achievable rank is {achievable}"
        )
        self.requested = requested
        self.achievable = achievable


class HierarchyError(RomError, ValueError):
    pass


class EmptyDatasetError(RomError, ValueError):
    pass


class TrainingDivergedError(RomError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class NewtonError(RomError):
    def __init__(self, message: str, residual: float, iterate: np.ndarray, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterate = iterate
        self.iterations = iterations


class SingularJacobianError(NewtonError):
    pass


class NewtonConvergenceError(NewtonError):
    pass


class ZeroReferenceError(RomError, ValueError):
    pass
