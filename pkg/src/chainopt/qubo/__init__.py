"""QUBO/Ising model of the supply-chain assignment problem."""

from .core import IsingModel, Poly, Qubo, bits_to_spins, spins_to_bits, to_ising
from .evaluate import Evaluation, FillResult, WindowViolation, ancilla_fill, evaluate, evaluate_full
from .export import export_model, layout_metadata
from .model import (
    AncillaGroup,
    ModelError,
    Multipliers,
    QuboModel,
    RationalApprox,
    VariableLayout,
    Weights,
    ancilla_bits,
    build_layout,
    compile_model,
    kpi_terms,
    penalty_terms,
    rational_approx,
)

__all__ = [
    "AncillaGroup", "Evaluation", "FillResult", "IsingModel", "ModelError", "Multipliers", "Poly",
    "Qubo", "QuboModel", "RationalApprox", "VariableLayout", "Weights", "WindowViolation",
    "ancilla_bits", "ancilla_fill", "bits_to_spins", "build_layout", "compile_model", "evaluate",
    "evaluate_full", "export_model", "kpi_terms", "layout_metadata", "penalty_terms",
    "rational_approx", "spins_to_bits", "to_ising",
]
