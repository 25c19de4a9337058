from __future__ import annotations

import os
from pathlib import Path
from typing import Literal

import dotenv
import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

dotenv.load_dotenv()

DEFAULT_SEED = int(os.getenv("DDROM_SEED", "0"))


class GridConfig(BaseModel):
    nx: int = 16
    ny: int = 16
    lx: float = 2.0
    ly: float = 1.0
    periodic: bool = False
    deformation_box: float = 0.3

    @field_validator("nx", "ny")
    @classmethod
    def _at_least_four(cls, value: int) -> int:
        if value < 4:
            raise ValueError("cell counts must be >= 4")
        return value


class FlowConfig(BaseModel):
    lid_velocity: float = 1.0
    lid_amplitude: float = 0.5
    smagorinsky: float = 0.17
    cfl_safety: float = 0.4
    divergence_limit: float = 1e6
    perturbation: float = 0.1
    ppe_solver: Literal["direct", "gmres"] = "direct"
    ppe_tol: float = 1e-10
    ppe_maxiter: int = 2000


class CaseConfig(BaseModel):
    family: Literal["unsteady-channel", "steady-deformed"] = "unsteady-channel"
    # unsteady-channel: [nu] per entry; steady-deformed: mu_g per entry
    params: list[list[float]] = Field(default_factory=lambda: [[0.01], [0.015], [0.02]])
    nu: float = 0.02
    dt: float = 0.01
    stride: int = 5
    horizon: float = 2.5
    steady_tol: float = 1e-8
    max_steps: int = 50000
    keep_intermediates: bool = True
    seed: int = DEFAULT_SEED
    workers: int = 1
    grid: GridConfig = Field(default_factory=GridConfig)
    flow: FlowConfig = Field(default_factory=FlowConfig)

    @field_validator("stride")
    @classmethod
    def _positive_stride(cls, value: int) -> int:
        if value < 1:
            raise ValueError("stride must be >= 1")
        return value


class PodConfig(BaseModel):
    energy_u: float = 0.995
    energy_p: float = 0.995
    energy_nut: float = 0.995
    # explicit (N_u, N_p, N_nut) override the energy thresholds
    dims: tuple[int, int, int] | None = None
    k: int = 2


class BoundaryConfig(BaseModel):
    tau: float = 1e3

    @field_validator("tau")
    @classmethod
    def _positive_tau(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("penalty weight tau must be > 0")
        return value


class TrainConfig(BaseModel):
    epochs: int = 20000
    learning_rate: float = 1e-3
    gamma: float = 0.2
    step: int = 3000
    coupled_epochs: int = 20000
    seed: int = DEFAULT_SEED
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: list[int] = Field(default_factory=lambda: [20, 20, 20])
    latent: int = 20
    log_every: int = 100

    @field_validator("epochs", "coupled_epochs", "step")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("epoch counts must be > 0")
        return value

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, value: float) -> float:
        if not 0 < value <= 1:
            raise ValueError("gamma must satisfy 0 < gamma <= 1")
        return value


class SolverConfig(BaseModel):
    tol: float = 1e-9
    max_iter: int = 50
    max_halvings: int = 8
    fd_step: float = 1e-6
    cond_limit: float = 1e14
    scheme: Literal["first-order", "second-order"] = "second-order"
    dt: float = 0.05
    horizon: float = 2.5
    extrapolation: float = 1.0
    closure: Literal["none", "dd", "dd-star", "quadratic"] = "none"
    # initializing snapshot of steady solves: mean of the training frames, or the first or
    # last frame of the solved parameter's own group
    steady_initial: Literal["mean", "first-frame", "converged"] = "mean"

    @model_validator(mode="after")
    def _check(self) -> "SolverConfig":
        if self.tol <= 0:
            raise ValueError("newton tolerance must be > 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        return self


class StudyConfig(BaseModel):
    test_params: list[list[float]] = Field(default_factory=lambda: [[0.015]])
    # (t_start, t_end) for time-averaged errors; None means the full trajectory
    time_window: tuple[float, float] | None = None
    modes: list[Literal["none", "dd", "dd-star", "quadratic"]] = Field(
        default_factory=lambda: ["none", "dd", "dd-star"]
    )


class PipelineConfig(BaseModel):
    case: CaseConfig = Field(default_factory=CaseConfig)
    pod: PodConfig = Field(default_factory=PodConfig)
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    study: StudyConfig = Field(default_factory=StudyConfig)


def load_config(path: str | Path | None, seed: int | None = None) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        data = yaml.safe_load(path.read_text()) or {}
    config = PipelineConfig.model_validate(data)
    if seed is not None:
        config.case.seed = seed
        config.train.seed = seed
    return config
