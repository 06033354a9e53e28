"""Supply-chain part assignment as QUBO/Ising optimisation.

Typical use::

    from chainopt import generate_synthetic, reduce_instance, compile_model, iqts_solve

    inst = generate_synthetic(20, 4, 3, 2, 2, 0.5, 0.8, seed=42)
    model = compile_model(reduce_instance(inst), (0.25, 0.25, 0.25, 0.25))
    solution, trace = iqts_solve(model)
"""

from .experiments import ExperimentSpec, run_experiment, weight_grid
from .informed import GenerationFailure, isf, isg, isi
from .instance import ProblemInstance, generate_synthetic, load_instance, save_instance
from .metasolvers import HbsConfig, IqtsConfig, build_subproblem, hbs_solve, iqts_solve
from .pareto import KpiPoint, hypervolume, pareto_filter, projected_pareto
from .preprocess import reduce_instance
from .qubo import Multipliers, QuboModel, Weights, compile_model, evaluate, to_ising
from .solution import Solution, check_assignment
from .tuning import DasState, ParamSpec, das_sample, das_update

__version__ = "0.1.0"

__all__ = [
    "DasState", "ExperimentSpec", "GenerationFailure", "HbsConfig", "IqtsConfig", "KpiPoint",
    "Multipliers", "ParamSpec", "ProblemInstance", "QuboModel", "Solution", "Weights",
    "build_subproblem", "check_assignment", "compile_model", "das_sample", "das_update", "evaluate",
    "generate_synthetic", "hbs_solve", "hypervolume", "iqts_solve", "isf", "isg", "isi",
    "load_instance", "pareto_filter", "projected_pareto", "reduce_instance", "run_experiment",
    "save_instance", "to_ising", "weight_grid",
]
