"""Embedded optimization: dense active-set QP and an SQP layer on top of it."""
from .qp import (
    INFEASIBLE,
    MAX_ITERATIONS,
    NUMERICAL_FAILURE,
    OPTIMAL,
    QpProblem,
    SolveReport,
    kkt_residual,
    solve_qp,
)
from .sqp import NlpProblem, SqpOptions, solve_nlp, qp_as_nlp
from .debug import dump_problem
from .sparsefd import ColoredJacobian, color_columns, detect_pattern

__all__ = [
    "INFEASIBLE",
    "MAX_ITERATIONS",
    "NUMERICAL_FAILURE",
    "OPTIMAL",
    "QpProblem",
    "SolveReport",
    "kkt_residual",
    "solve_qp",
    "NlpProblem",
    "SqpOptions",
    "solve_nlp",
    "qp_as_nlp",
    "dump_problem",
    "ColoredJacobian",
    "color_columns",
    "detect_pattern",
]
