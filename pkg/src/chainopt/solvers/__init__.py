"""Sub-solvers over QUBO and Ising models."""

from .base import SolverResult, trace_csv
from .brute import TooLargeError, brute_force, brute_force_gray
from .cacm import CacmParams, cacm_solve
from .ibp import IbpParams, TreeBP, ibp_solve, sample_tree
from .qaoa import QaoaError, QaoaParams, qaoa_solve, ramp, samples_csv
from .sa import SaParams, sa_solve

__all__ = [
    "CacmParams", "IbpParams", "QaoaError", "QaoaParams", "SaParams", "SolverResult", "TooLargeError",
    "TreeBP", "brute_force", "brute_force_gray", "cacm_solve", "ibp_solve", "qaoa_solve", "ramp",
    "sa_solve", "sample_tree", "samples_csv", "trace_csv",
]
