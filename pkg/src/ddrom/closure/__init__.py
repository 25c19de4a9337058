from ddrom.closure.ansatz import (
    QuadraticAnsatz,
    evaluate_quadratic_ansatz,
    fit_quadratic_ansatz,
)
from ddrom.closure.archive import load_ansatz, load_dataset, save_ansatz, save_dataset
from ddrom.closure.extract import (
    ClosureDataset,
    ClosureSample,
    Normalization,
    SplitSpec,
    build_dataset,
    evaluate_operator,
    exact_correction,
    tau_with_eddy_viscosity,
)

__all__ = [
    "ClosureDataset",
    "ClosureSample",
    "Normalization",
    "QuadraticAnsatz",
    "SplitSpec",
    "build_dataset",
    "evaluate_operator",
    "evaluate_quadratic_ansatz",
    "exact_correction",
    "fit_quadratic_ansatz",
    "load_ansatz",
    "load_dataset",
    "save_ansatz",
    "save_dataset",
    "tau_with_eddy_viscosity",
]
