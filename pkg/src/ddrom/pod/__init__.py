from ddrom.pod.archive import load_bases, load_basis, save_bases, save_basis
from ddrom.pod.basis import (
    EnergySpectrum,
    InnerProduct,
    PodBasis,
    compute_bases,
    compute_basis,
    correlation_matrix,
    inner_product_for,
    mid_configuration,
    project,
    reconstruct,
    select_modes_by_energy,
)

__all__ = [
    "EnergySpectrum",
    "InnerProduct",
    "PodBasis",
    "compute_bases",
    "compute_basis",
    "correlation_matrix",
    "inner_product_for",
    "load_bases",
    "load_basis",
    "mid_configuration",
    "project",
    "reconstruct",
    "save_bases",
    "save_basis",
    "select_modes_by_energy",
]
