"""Small dense conic programs: modelling helpers and an interior-point solver."""

from .ipm import ConicSolution, Status, kkt_residuals, solve, solve_batch
from .problem import (
    Affine,
    ConeSpec,
    ConicProblem,
    HermitianVariable,
    ProblemBuilder,
    SymmetricVariable,
    dump_problem,
    realify_hermitian_block,
    schur_2x2_as_rotated_soc,
)

__all__ = [
    "Affine",
    "ConeSpec",
    "ConicProblem",
    "ConicSolution",
    "HermitianVariable",
    "ProblemBuilder",
    "Status",
    "SymmetricVariable",
    "dump_problem",
    "kkt_residuals",
    "realify_hermitian_block",
    "schur_2x2_as_rotated_soc",
    "solve",
    "solve_batch",
]
