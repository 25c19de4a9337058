import io

import pytest
from rich.console import Console

from ddrom.config import CaseConfig, GridConfig, PipelineConfig
from ddrom.fom.harness import run_case
from ddrom.operators.assembly import BoundarySpec
from ddrom.pipeline import run_study
from ddrom.pod.basis import compute_bases


@pytest.fixture(scope="session")
def channel_snapshots():
    config = CaseConfig(
        family="unsteady-channel",
        params=[[0.02], [0.03], [0.025]],
        dt=0.01,
        stride=2,
        horizon=0.2,
        seed=1,
        grid=GridConfig(nx=8, ny=8, lx=1.0, ly=1.0),
    )
    return run_case(config, quiet=True)


@pytest.fixture(scope="session")
def channel_bases(channel_snapshots):
    return compute_bases(channel_snapshots, {"u": 6, "p": 6, "nut": 6})


@pytest.fixture
def lid_boundary():
    return BoundarySpec()


TINY_PIPELINE = {
    "case": {
        "family": "unsteady-channel",
        "params": [[0.02], [0.03], [0.025]],
        "dt": 0.01,
        "stride": 2,
        "horizon": 0.2,
        "seed": 1,
        "grid": {"nx": 8, "ny": 8, "lx": 1.0, "ly": 1.0},
    },
    "pod": {"dims": [2, 2, 2], "k": 2},
    "train": {
        "epochs": 30,
        "coupled_epochs": 20,
        "step": 10,
        "hidden": [4],
        "latent": 4,
        "seed": 1,
    },
    "solver": {"dt": 0.02, "horizon": 0.2},
    "study": {"test_params": [[0.025]], "modes": ["none", "dd", "dd-star"]},
}


@pytest.fixture
def tiny_config():
    return PipelineConfig.model_validate(TINY_PIPELINE)


@pytest.fixture(scope="session")
def tiny_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    config = PipelineConfig.model_validate(TINY_PIPELINE)
    result = run_study(config, out, Console(file=io.StringIO()), quiet=True)
    return out, result


STEADY_PIPELINE = {
    "case": {
        "family": "steady-deformed",
        "params": [[-0.2], [0.2], [0.0]],
        "nu": 0.5,
        "dt": 0.02,
        "stride": 5,
        "steady_tol": 1e-8,
        "seed": 1,
        "grid": {"nx": 8, "ny": 8, "lx": 1.0, "ly": 1.0},
    },
    "pod": {"dims": [2, 2, 2], "k": 2},
    "train": TINY_PIPELINE["train"],
    "study": {"test_params": [[0.0]], "modes": ["none", "dd", "dd-star"]},
}


@pytest.fixture
def steady_config():
    return PipelineConfig.model_validate(STEADY_PIPELINE)


@pytest.fixture(scope="session")
def steady_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("steady")
    config = PipelineConfig.model_validate(STEADY_PIPELINE)
    result = run_study(config, out, Console(file=io.StringIO()), quiet=True)
    return out, result
