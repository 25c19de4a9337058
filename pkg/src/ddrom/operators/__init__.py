from ddrom.operators.archive import load_operators, save_operators
from ddrom.operators.assembly import (
    BoundarySpec,
    ReducedOperatorSet,
    assemble,
    assemble_for_parameter,
    penalty_contribution,
)

__all__ = [
    "BoundarySpec",
    "ReducedOperatorSet",
    "assemble",
    "assemble_for_parameter",
    "load_operators",
    "penalty_contribution",
    "save_operators",
]
