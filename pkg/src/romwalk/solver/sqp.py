"""Line-search SQP for smooth nonlinear programs.

Each iteration solves a QP built from a damped-BFGS model of the
Lagrangian Hessian and the linearized constraints, then globalizes the step
with an l1 exact-penalty merit function (with one second-order correction
attempt before backtracking).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .qp import (
    MAX_ITERATIONS,
    NUMERICAL_FAILURE,
    OPTIMAL,
    QpProblem,
    SolveReport,
    solve_qp,
)

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    """Raised by problem callbacks when a point cannot be evaluated."""


@dataclass
class NlpProblem:
    """minimize cost(z) s.t. c_min <= constraints(z) <= c_max, z_min <= z <= z_max.

    ``cost_grad`` and ``jacobian`` are optional; when absent they are formed
    by dense central differences. ``jacobian_mode`` records whether a supplied
    ``jacobian`` is exact ("analytic") or itself a difference scheme such as
    :class:`ColoredJacobian`.
    """

    n: int
    cost: Callable[[np.ndarray], float]
    constraints: Callable[[np.ndarray], np.ndarray]
    z_min: np.ndarray
    z_max: np.ndarray
    c_min: np.ndarray
    c_max: np.ndarray
    cost_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian_mode: str = "finite-difference"
    names: Optional[list] = None

    def __post_init__(self):
        self.z_min = np.broadcast_to(np.asarray(self.z_min, float), (self.n,)).copy()
        self.z_max = np.broadcast_to(np.asarray(self.z_max, float), (self.n,)).copy()
        self.c_min = np.atleast_1d(np.asarray(self.c_min, float)).copy()
        self.c_max = np.atleast_1d(np.asarray(self.c_max, float)).copy()
        if self.c_min.shape != self.c_max.shape:
            raise ValueError("c_min and c_max must have the same length")
        if np.any(self.z_min > self.z_max) or np.any(self.c_min > self.c_max):
            raise ValueError("lower bounds exceed upper bounds")
        if self.jacobian_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.jacobian_mode == "analytic" and self.jacobian is None:
            raise ValueError("analytic jacobian_mode needs a jacobian callable")

    @property
    def m(self) -> int:
        return self.c_min.size

    def violation(self, cz) -> np.ndarray:
        """Per-row constraint violation (nonnegative)."""
        return np.maximum(0.0, np.maximum(self.c_min - cz, cz - self.c_max))


@dataclass
class SqpOptions:
    max_iter: int = 200
    constraint_tol: float = 1e-6
    optimality_tol: float = 1e-5
    fd_step: float = 1e-6
    armijo: float = 1e-4
    min_step: float = 1e-10
    penalty_margin: float = 1.0
    second_order_correction: bool = True
    dump_path: Optional[str] = None
    # starting BFGS matrix (n x n, or a diagonal as a vector); identity with
    # first-step rescaling when absent
    initial_hessian: Optional[np.ndarray] = field(default=None, repr=False)
    callback: Optional[Callable] = field(default=None, repr=False)


def _fd_gradient(fun, z, h):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def _fd_jacobian(fun, z, h, m):
    J = np.empty((m, z.size))
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        J[:, i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return J


class _Evaluator:
    def __init__(self, problem: NlpProblem, opts: SqpOptions):
        self.p = problem
        self.h = opts.fd_step
        self.n_eval = 0

    def cost(self, z):
        self.n_eval += 1
        v = float(self.p.cost(z))
        if not np.isfinite(v):
            raise EvaluationError("non-finite cost")
        return v

    def cons(self, z):
        c = np.atleast_1d(np.asarray(self.p.constraints(z), float))
        if c.shape != (self.p.m,):
            raise ValueError(f"constraints returned shape {c.shape}, expected ({self.p.m},)")
        if not np.all(np.isfinite(c)):
            raise EvaluationError("non-finite constraint value")
        return c

    def grad(self, z):
        if self.p.cost_grad is not None:
            return np.asarray(self.p.cost_grad(z), float)
        return _fd_gradient(self.p.cost, z, self.h)

    def jac(self, z):
        if self.p.m == 0:
            return np.zeros((0, self.p.n))
        if self.p.jacobian is not None:
            return np.asarray(self.p.jacobian(z), float).reshape(self.p.m, self.p.n)
        return _fd_jacobian(self.p.constraints, z, self.h, self.p.m)


def solve_nlp(problem: NlpProblem, initial_guess, options: Optional[SqpOptions] = None) -> SolveReport:
    """Solve ``problem`` from ``initial_guess`` (clamped into the bounds)."""
    opts = options or SqpOptions()
    ev = _Evaluator(problem, opts)
    n, m = problem.n, problem.m
    z = np.clip(np.asarray(initial_guess, float).copy(), problem.z_min, problem.z_max)
    dump = _Dump(opts.dump_path)

    try:
        f, g = ev.cost(z), ev.grad(z)
        cz, J = ev.cons(z), ev.jac(z)
    except EvaluationError as exc:
        return SolveReport(NUMERICAL_FAILURE, z, np.zeros(m + n), 0, np.inf,
                           message=f"initial point: {exc}")

    if opts.initial_hessian is None:
        B = np.eye(n)
    else:
        H0 = np.asarray(opts.initial_hessian, float)
        B = np.diag(H0) if H0.ndim == 1 else H0.copy()
    nu = 1.0
    warm = None
    y_all = np.zeros(m + n)
    status, msg = MAX_ITERATIONS, "iteration limit reached"
    stat = viol = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        qp = _subproblem(problem, B, g, z, cz, J)
        rep = solve_qp(qp, warm_start=warm, kkt_tol=1e-6)
        if rep.ok:
            p, y_all, warm = rep.solution, rep.multipliers, rep.active_set
        else:
            warm = None
            p = _restoration_step(problem, z, cz, J)
            y_all = np.zeros(m + n)
        yc, yb = y_all[:m], y_all[m:]

        viol = float(problem.violation(cz).max(initial=0.0))
        stat = _stationarity(g, J, yc, yb)
        dump.write(it, z, f, viol, stat, rep.status)
        if opts.callback is not None:
            opts.callback(it, z, f, viol, stat)
        log.debug("sqp %3d f=%.6e viol=%.2e stat=%.2e qp=%s", it, f, viol, stat, rep.status)
        if rep.ok and viol <= opts.constraint_tol and stat <= opts.optimality_tol:
            status, msg = OPTIMAL, ""
            # take the final QP step when it keeps feasibility and does not raise the cost
            zt = np.clip(z + p, problem.z_min, problem.z_max)
            try:
                ft, ct = ev.cost(zt), ev.cons(zt)
                vt = float(problem.violation(ct).max(initial=0.0))
                if vt <= max(viol, opts.constraint_tol) and ft <= f + 1e-12 * max(1.0, abs(f)):
                    z, f, cz, viol = zt, ft, ct, vt
            except EvaluationError:
                pass
            break

        nu = max(nu, np.abs(yc).max(initial=0.0) + opts.penalty_margin)
        phi0 = f + nu * problem.violation(cz).sum()
        D = g @ p - nu * problem.violation(cz).sum()
        accepted = None
        alpha = 1.0
        tried_soc = False
        while alpha >= opts.min_step:
            zt = np.clip(z + alpha * p, problem.z_min, problem.z_max)
            try:
                ft, ct = ev.cost(zt), ev.cons(zt)
            except EvaluationError:
                alpha *= 0.5
                continue
            phit = ft + nu * problem.violation(ct).sum()
            if phit <= phi0 + opts.armijo * alpha * min(D, 0.0):
                accepted = (zt, ft, ct)
                break
            if alpha == 1.0 and opts.second_order_correction and not tried_soc and rep.ok:
                tried_soc = True
                soc = _second_order_correction(problem, B, g, z, cz, J, ct, p, warm)
                if soc is not None:
                    zs = np.clip(z + soc, problem.z_min, problem.z_max)
                    try:
                        fs, cs = ev.cost(zs), ev.cons(zs)
                        if fs + nu * problem.violation(cs).sum() <= phi0 + opts.armijo * min(D, 0.0):
                            accepted = (zs, fs, cs)
                            break
                    except EvaluationError:
                        pass
            alpha *= 0.5
        if accepted is None:
            status, msg = NUMERICAL_FAILURE, "line search collapsed"
            break

        z_new, f_new, c_new = accepted
        try:
            g_new, J_new = ev.grad(z_new), ev.jac(z_new)
        except EvaluationError as exc:
            status, msg = NUMERICAL_FAILURE, str(exc)
            break
        s = z_new - z
        yv = (g_new - g) - (J_new - J).T @ yc
        B = _damped_bfgs(B, s, yv, first=(it == 1 and opts.initial_hessian is None))
        z, f, g, cz, J = z_new, f_new, g_new, c_new, J_new
    else:
        viol = float(problem.violation(cz).max(initial=0.0))

    res = max(viol, stat) if np.isfinite(stat) else np.inf
    dump.close()
    return SolveReport(status, z, y_all, it, float(res), warm or (), msg, f,
                       extra={"constraint_violation": viol, "stationarity": stat,
                              "evaluations": ev.n_eval})


def _subproblem(problem, B, g, z, cz, J):
    return QpProblem(
        0.5 * (B + B.T), g,
        ineq_constraints=(J, problem.c_min - cz, problem.c_max - cz) if problem.m else None,
        variable_bounds=(problem.z_min - z, problem.z_max - z),
    )


def _stationarity(g, J, yc, yb):
    r = g - J.T @ yc - yb
    return float(np.abs(r).max(initial=0.0) / max(1.0, np.abs(g).max(initial=0.0)))


def _restoration_step(problem, z, cz, J):
    """Least-squares step reducing the linearized violation, kept in bounds."""
    target = np.clip(cz, problem.c_min, problem.c_max)
    rows = problem.violation(cz) > 0
    if not np.any(rows):
        return np.zeros_like(z)
    p = np.linalg.lstsq(J[rows], target[rows] - cz[rows], rcond=None)[0]
    return np.clip(z + p, problem.z_min, problem.z_max) - z


def _second_order_correction(problem, B, g, z, cz, J, c_trial, p, warm):
    shift = c_trial - J @ p
    qp = QpProblem(0.5 * (B + B.T), g,
                   ineq_constraints=(J, problem.c_min - shift, problem.c_max - shift),
                   variable_bounds=(problem.z_min - z, problem.z_max - z))
    rep = solve_qp(qp, warm_start=warm, kkt_tol=1e-6)
    return rep.solution if rep.ok else None


def _damped_bfgs(B, s, y, first=False):
    sBs = s @ B @ s
    if sBs <= 0 or not np.isfinite(sBs):
        return B
    sy = s @ y
    if first and sy > 0:
        B = B * ((y @ y) / sy)
        sBs = s @ B @ s
    if sy < 0.2 * sBs:
        theta = 0.8 * sBs / (sBs - sy)
        y = theta * y + (1 - theta) * (B @ s)
        sy = s @ y
    Bs = B @ s
    B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return 0.5 * (B + B.T)


class _Dump:
    """JSON-lines log of iterates for postmortem analysis."""

    def __init__(self, path):
        self.fh = open(path, "w") if path else None

    def write(self, it, z, f, viol, stat, qp_status):
        if self.fh is None:
            return
        import json
        self.fh.write(json.dumps({"iteration": it, "cost": f, "violation": viol,
                                  "stationarity": stat, "qp_status": qp_status,
                                  "z": [float(v) for v in z]}) + "\n")

    def close(self):
        if self.fh is not None:
            self.fh.close()


def qp_as_nlp(qp: QpProblem) -> NlpProblem:
    """Wrap a QpProblem as an NlpProblem with exact derivatives."""
    G, c = qp.cost_matrix, qp.cost_linear
    rows, lo, hi = [], [], []
    if qp.eq_constraints is not None:
        E, e = qp.eq_constraints
        rows.append(E)
        lo.append(e)
        hi.append(e)
    if qp.ineq_constraints is not None:
        A, l, u = qp.ineq_constraints
        rows.append(A)
        lo.append(l)
        hi.append(u)
    A = np.vstack(rows) if rows else np.zeros((0, qp.n))
    bounds = qp.variable_bounds or (np.full(qp.n, -np.inf), np.full(qp.n, np.inf))
    return NlpProblem(
        n=qp.n,
        cost=lambda z: 0.5 * z @ G @ z + c @ z,
        cost_grad=lambda z: G @ z + c,
        constraints=lambda z: A @ z,
        jacobian=lambda z: A,
        jacobian_mode="analytic",
        z_min=bounds[0], z_max=bounds[1],
        c_min=np.concatenate(lo) if lo else np.zeros(0),
        c_max=np.concatenate(hi) if hi else np.zeros(0),
    )
