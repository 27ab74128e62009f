"""Role-allocation engine: candidates, problem builders, exact solvers."""

from .bruteforce import ENUMERATION_LIMIT, OracleSizeError, brute_force_solve
from .candidates import (Candidate, CandidateSet, build_candidates,
                         combination_id, count_weight)
from .kernels import (active_kernel_name, get_search_kernel, numba_requested,
                      warm_kernel)
from .problem import (COLLABORATIVE, COOPERATIVE, AllocationProblem,
                      AllocationSolution, Budget, ProblemError,
                      build_collaborative, build_cooperative,
                      diagnose_infeasibility, verify_solution)
from .solver import MAX_AGENTS, SolverError, solve

__all__ = [
    "AllocationProblem", "AllocationSolution", "Budget", "Candidate",
    "CandidateSet", "COLLABORATIVE", "COOPERATIVE", "ENUMERATION_LIMIT",
    "MAX_AGENTS", "OracleSizeError", "ProblemError", "SolverError",
    "active_kernel_name", "brute_force_solve", "build_candidates",
    "build_collaborative", "build_cooperative", "combination_id",
    "count_weight", "diagnose_infeasibility", "get_search_kernel",
    "numba_requested", "solve", "verify_solution", "warm_kernel",
]
