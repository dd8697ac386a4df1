"""CNF encoding and satisfiability checking for AIG goals."""

from .cnf import (
    Cnf,
    PartialModel,
    SolverOutputError,
    check_model,
    export_dimacs,
    import_external_verdict,
    parse_dimacs,
    solve_external,
    tseitin_encode,
)
from .prove import ProofResult, ReplayFailure, check_goal, prove_equal, prove_valid
from .solver import Budget, ModelCheckError, SatResult, Solver, solve

__all__ = [
    "Budget",
    "Cnf",
    "ModelCheckError",
    "PartialModel",
    "ProofResult",
    "ReplayFailure",
    "SatResult",
    "Solver",
    "SolverOutputError",
    "check_goal",
    "check_model",
    "export_dimacs",
    "import_external_verdict",
    "parse_dimacs",
    "prove_equal",
    "prove_valid",
    "solve",
    "solve_external",
    "tseitin_encode",
]
