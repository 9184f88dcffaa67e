"""JSON dumps of optimization problems for postmortem analysis."""
import json

import numpy as np

from .qp import QpProblem
from .sqp import NlpProblem


def _arr(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=float)
    # json has no inf; keep them readable as strings
    return np.where(np.isfinite(a), a, np.nan).tolist() if a.ndim else float(a)


def dump_problem(problem, path, x=None):
    """Write ``problem`` (and optionally a point ``x``) to ``path`` as JSON.

    For an NlpProblem the callbacks are evaluated at ``x`` (required) so the
    file holds the local data: cost, constraint values and bounds.
    """
    if isinstance(problem, QpProblem):
        doc = {
            "kind": "qp",
            "cost_matrix": _arr(problem.cost_matrix),
            "cost_linear": _arr(problem.cost_linear),
            "eq_constraints": None if problem.eq_constraints is None
            else [_arr(v) for v in problem.eq_constraints],
            "ineq_constraints": None if problem.ineq_constraints is None
            else [_arr(v) for v in problem.ineq_constraints],
            "variable_bounds": None if problem.variable_bounds is None
            else [_arr(v) for v in problem.variable_bounds],
        }
        if x is not None:
            doc["x"] = _arr(x)
    elif isinstance(problem, NlpProblem):
        if x is None:
            raise ValueError("an NLP dump needs the point x")
        x = np.asarray(x, dtype=float)
        doc = {
            "kind": "nlp",
            "n": problem.n,
            "m": problem.m,
            "x": _arr(x),
            "cost": float(problem.cost(x)),
            "constraints": _arr(problem.constraints(x)),
            "z_min": _arr(problem.z_min),
            "z_max": _arr(problem.z_max),
            "c_min": _arr(problem.c_min),
            "c_max": _arr(problem.c_max),
            "names": problem.names,
        }
    else:
        raise TypeError(f"cannot dump {type(problem).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, allow_nan=True)
    return path
