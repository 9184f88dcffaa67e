"""Dense primal active-set solver for convex quadratic programs.

The problem handled is

    minimize    1/2 x'Gx + c'x
    subject to  E x = e
                lo <= A x <= hi
                lb <= x <= ub

with G symmetric positive semidefinite. Multipliers follow the convention
``grad f(x) = C' y`` where C stacks the equality rows, the general rows and
one identity row per variable, so a lower-bound multiplier is >= 0 and an
upper-bound multiplier is <= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"

LOWER, UPPER, EQUAL = 1, -1, 0


@dataclass(frozen=True)
class QpProblem:
    cost_matrix: np.ndarray
    cost_linear: np.ndarray
    eq_constraints: Optional[tuple] = None
    ineq_constraints: Optional[tuple] = None
    variable_bounds: Optional[tuple] = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.cost_matrix, dtype=float))
        c = np.asarray(self.cost_linear, dtype=float).ravel()
        n = c.size
        if G.shape != (n, n):
            raise ValueError(f"cost_matrix must be {n}x{n}, got {G.shape}")
        scale = max(1.0, np.abs(G).max(initial=0.0))
        if np.abs(G - G.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("cost_matrix is not symmetric")
        object.__setattr__(self, "cost_matrix", G)
        object.__setattr__(self, "cost_linear", c)

        if self.eq_constraints is not None:
            E, e = self.eq_constraints
            E = np.asarray(E, dtype=float).reshape(-1, n)
            e = np.asarray(e, dtype=float).ravel()
            if e.size != E.shape[0]:
                raise ValueError("equality rhs length does not match matrix rows")
            object.__setattr__(self, "eq_constraints", (E, e))
        if self.ineq_constraints is not None:
            A, lo, hi = self.ineq_constraints
            A = np.asarray(A, dtype=float).reshape(-1, n)
            m = A.shape[0]
            lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,)).copy()
            hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,)).copy()
            if np.any(lo > hi):
                raise ValueError("inequality lower bound exceeds upper bound")
            object.__setattr__(self, "ineq_constraints", (A, lo, hi))
        if self.variable_bounds is not None:
            lb, ub = self.variable_bounds
            lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
            ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
            if np.any(lb > ub):
                raise ValueError("variable lower bound exceeds upper bound")
            object.__setattr__(self, "variable_bounds", (lb, ub))

    @property
    def n(self) -> int:
        return self.cost_linear.size

    @property
    def n_eq(self) -> int:
        return 0 if self.eq_constraints is None else self.eq_constraints[0].shape[0]

    @property
    def n_ineq(self) -> int:
        return 0 if self.ineq_constraints is None else self.ineq_constraints[0].shape[0]

    def stacked(self):
        """Return (C, lo, hi) with equality, general and bound rows stacked."""
        n = self.n
        blocks, los, his = [], [], []
        if self.eq_constraints is not None:
            E, e = self.eq_constraints
            blocks.append(E)
            los.append(e)
            his.append(e)
        if self.ineq_constraints is not None:
            A, lo, hi = self.ineq_constraints
            blocks.append(A)
            los.append(lo)
            his.append(hi)
        blocks.append(np.eye(n))
        if self.variable_bounds is not None:
            los.append(self.variable_bounds[0])
            his.append(self.variable_bounds[1])
        else:
            los.append(np.full(n, -np.inf))
            his.append(np.full(n, np.inf))
        return np.vstack(blocks), np.concatenate(los), np.concatenate(his)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.cost_matrix @ x + self.cost_linear @ x)


@dataclass(frozen=True)
class SolveReport:
    status: str
    solution: np.ndarray
    multipliers: np.ndarray
    iterations: int
    kkt_residual: float
    active_set: tuple = ()
    message: str = ""
    objective: float = float("nan")
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def kkt_residual(problem: QpProblem, x, y) -> float:
    """Scaled first-order optimality measure of (x, y) for ``problem``.

    Maximum of stationarity (relative to the gradient scale), primal
    infeasibility, multiplier sign violation and complementarity.
    """
    C, lo, hi = problem.stacked()
    G, c = problem.cost_matrix, problem.cost_linear
    grad = G @ x + c
    scale = max(1.0, np.abs(grad).max(initial=0.0), np.abs(c).max(initial=0.0))
    stat = np.abs(grad - C.T @ y).max(initial=0.0) / scale
    r = C @ x
    infeas = max(np.max(lo - r, initial=0.0), np.max(r - hi, initial=0.0), 0.0)
    eq = lo == hi
    # a positive multiplier needs a finite lower bound, a negative one an upper bound
    sign = np.where(~eq & (y > 0) & ~np.isfinite(lo), y, 0.0)
    sign = np.maximum(sign, np.where(~eq & (y < 0) & ~np.isfinite(hi), -y, 0.0))
    slack_lo = np.where(np.isfinite(lo), r - lo, np.inf)
    slack_hi = np.where(np.isfinite(hi), hi - r, np.inf)
    comp = np.zeros_like(y)
    pos, neg = ~eq & (y > 0) & np.isfinite(lo), ~eq & (y < 0) & np.isfinite(hi)
    comp[pos] = y[pos] * slack_lo[pos]
    comp[neg] = -y[neg] * slack_hi[neg]
    comp = comp / scale
    return float(max(stat, infeas, np.max(sign, initial=0.0), np.max(np.abs(comp), initial=0.0)))


class _Core:
    """Primal active-set iterations on normalized rows.

    ``work`` is a list of (row, side) pairs. Equality rows always stay in the
    working set. Steps come from a null-space solve; a singular reduced
    Hessian yields a zero-curvature descent ray that must be blocked by a
    constraint, otherwise the problem is unbounded.
    """

    def __init__(self, G, c, C, lo, hi, feas_tol, max_iter):
        self.G, self.c, self.C, self.lo, self.hi = G, c, C, lo, hi
        self.feas_tol = feas_tol
        self.max_iter = max_iter
        self.gscale = max(1.0, np.abs(G).max(initial=0.0))

    def _basis(self, work):
        n = self.G.shape[0]
        if not work:
            return np.zeros((n, 0)), np.eye(n), np.zeros((0, 0))
        A = self.C[[i for i, _ in work]]
        Q, R = np.linalg.qr(A.T, mode="complete")
        k = len(work)
        return Q[:, :k], Q[:, k:], R[:k, :k]

    def _step(self, x, Z):
        g = self.G @ x + self.c
        if Z.shape[1] == 0:
            return np.zeros_like(x), False, g
        Hr = Z.T @ self.G @ Z
        gr = Z.T @ g
        w, V = np.linalg.eigh(0.5 * (Hr + Hr.T))
        curv_tol = 1e-11 * self.gscale
        pos = w > curv_tol
        if not np.all(pos):
            Vn = V[:, ~pos]
            gn = Vn.T @ gr
            gtol = 1e-12 * max(1.0, np.abs(g).max(initial=0.0))
            if np.abs(gn).max() > gtol:
                return -Z @ (Vn @ gn), True, g
        Vp = V[:, pos]
        pz = -Vp @ ((Vp.T @ gr) / w[pos])
        return Z @ pz, False, g

    def run(self, x, work):
        C, lo, hi = self.C, self.lo, self.hi
        m = C.shape[0]
        it = 0
        at_min = False  # x minimizes over the current working set
        while it < self.max_iter:
            it += 1
            Y, Z, R = self._basis(work)
            if at_min:
                p, ray, g = np.zeros_like(x), False, self.G @ x + self.c
            else:
                p, ray, g = self._step(x, Z)
            pnorm = np.abs(p).max(initial=0.0)
            if not ray and pnorm <= 1e-13 * max(1.0, np.abs(x).max(initial=0.0)):
                at_min = False
                if work:
                    y_w = np.linalg.solve(R, Y.T @ g)
                else:
                    y_w = np.zeros(0)
                # sign violation per working row, normalized rows keep scales comparable
                worst, worst_val = -1, 1e-12 * max(1.0, np.abs(g).max(initial=0.0))
                for j, (i, side) in enumerate(work):
                    if side == EQUAL:
                        continue
                    v = -side * y_w[j]
                    if v > worst_val:
                        worst, worst_val = j, v
                if worst < 0:
                    return x, work, y_w, it, OPTIMAL
                work = work[:worst] + work[worst + 1:]
                continue

            r = C @ x
            ap = C @ p
            in_work = np.zeros(m, dtype=bool)
            for i, _ in work:
                in_work[i] = True
            tiny = 1e-12 * max(pnorm, 1e-300)
            alpha = 1.0
            if ray:
                # "flat" directions may still carry a sliver of curvature;
                # never step past the line minimizer
                curv = p @ self.G @ p
                alpha = -(g @ p) / curv if curv > 0 else np.inf
            block = None
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = (~in_work) & (ap < -tiny) & np.isfinite(lo)
                if np.any(cand):
                    a = np.maximum((lo[cand] - r[cand]) / ap[cand], 0.0)
                    j = int(np.argmin(a))
                    if a[j] < alpha:
                        alpha, block = a[j], (int(np.flatnonzero(cand)[j]), LOWER)
                cand = (~in_work) & (ap > tiny) & np.isfinite(hi)
                if np.any(cand):
                    a = np.maximum((hi[cand] - r[cand]) / ap[cand], 0.0)
                    j = int(np.argmin(a))
                    if a[j] < alpha:
                        alpha, block = a[j], (int(np.flatnonzero(cand)[j]), UPPER)
            if not np.isfinite(alpha):
                return x, work, None, it, "unbounded"
            x = x + alpha * p
            if block is not None:
                work = work + [block]
            else:
                # a full Newton step lands on the subspace minimizer; recomputing
                # the step there only returns roundoff
                at_min = not ray
        return x, work, None, it, MAX_ITERATIONS


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of the rows of A."""
    if A.shape[0] == 0:
        return []
    keep = []
    basis = np.zeros((A.shape[1], 0))
    for i, row in enumerate(A):
        nrm = np.linalg.norm(row)
        if nrm == 0:
            continue
        resid = row - basis @ (basis.T @ row)
        if np.linalg.norm(resid) > tol * nrm:
            keep.append(i)
            basis = np.column_stack([basis, resid / np.linalg.norm(resid)])
    return keep


def solve_qp(problem: QpProblem, warm_start: Optional[Sequence] = None, *,
             feas_tol: float = 1e-9, kkt_tol: float = 1e-8,
             max_iter: Optional[int] = None, x0=None) -> SolveReport:
    """Solve a convex QP with a primal active-set method.

    ``warm_start`` is an active set as returned in ``SolveReport.active_set``
    (pairs of stacked row index and side). Without one a phase-1 linear
    program finds a feasible point first.
    """
    G, c = problem.cost_matrix, problem.cost_linear
    n = problem.n
    C_raw, lo_raw, hi_raw = problem.stacked()
    norms = np.linalg.norm(C_raw, axis=1)
    norms[norms == 0] = 1.0
    C = C_raw / norms[:, None]
    lo, hi = lo_raw / norms, hi_raw / norms
    m = C.shape[0]
    if max_iter is None:
        max_iter = 20 * (n + m) + 100
    total_it = 0

    eq_rows = np.flatnonzero(lo == hi)
    # rows with lo == hi that are general constraints behave as equalities too
    indep = _independent_rows(C[eq_rows])
    eq_keep = [int(eq_rows[i]) for i in indep]

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if eq_rows.size:
        E, e = C[eq_rows], lo[eq_rows]
        x = x + np.linalg.lstsq(E, e - E @ x, rcond=None)[0]
        if np.abs(E @ x - e).max() > 1e-8 * max(1.0, np.abs(e).max()):
            return _report(problem, INFEASIBLE, x, None, norms, [], total_it,
                           "inconsistent equality constraints")

    base_work = [(i, EQUAL) for i in eq_keep]
    core = _Core(G, c, C, lo, hi, feas_tol, max_iter)

    work = None
    if warm_start:
        ws = [(int(i), int(s)) for i, s in warm_start if int(i) < m and lo[int(i)] != hi[int(i)]]
        cand = base_work + ws
        keep = _independent_rows(C[[i for i, _ in cand]]) if cand else []
        cand = [cand[k] for k in keep]
        xw = _eqp(G, c, C, lo, hi, cand, x)
        if xw is not None and _max_violation(C, lo, hi, xw) <= feas_tol:
            x, work = xw, cand
        elif xw is not None:
            x = xw

    if work is None:
        viol = _max_violation(C, lo, hi, x)
        if viol > feas_tol:
            x, it1, status = _phase1(C, lo, hi, eq_keep, x, feas_tol, max_iter)
            total_it += it1
            if status != OPTIMAL:
                return _report(problem, status, x, None, norms, [], total_it,
                               "phase 1 did not converge")
            if _max_violation(C, lo, hi, x) > feas_tol:
                return _report(problem, INFEASIBLE, x, None, norms, [], total_it,
                               "no point satisfies the constraints")
        work = list(base_work)

    x, work, y_w, it2, status = core.run(x, work)
    total_it += it2
    if status == "unbounded":
        return _report(problem, NUMERICAL_FAILURE, x, None, norms, work, total_it,
                       "objective unbounded below on the feasible set")
    if status != OPTIMAL:
        return _report(problem, status, x, None, norms, work, total_it,
                       "iteration limit reached")

    x, y_w = _polish(G, c, C, lo, hi, work, x, y_w)
    y = np.zeros(m)
    for (i, _), v in zip(work, y_w):
        y[i] = v
    rep = _report(problem, OPTIMAL, x, y, norms, work, total_it, "")
    if rep.kkt_residual > kkt_tol:
        return SolveReport(NUMERICAL_FAILURE, rep.solution, rep.multipliers, total_it,
                           rep.kkt_residual, rep.active_set,
                           "KKT residual above tolerance", rep.objective)
    return rep


def _max_violation(C, lo, hi, x):
    r = C @ x
    return float(max(np.max(lo - r, initial=0.0), np.max(r - hi, initial=0.0), 0.0))


def _eqp(G, c, C, lo, hi, work, x_start):
    """Minimizer of the QP with the working rows held at their bounds."""
    n = G.shape[0]
    if work:
        A = C[[i for i, _ in work]]
        b = np.array([lo[i] if s != UPPER else hi[i] for i, s in work])
        xp = x_start + np.linalg.lstsq(A, b - A @ x_start, rcond=None)[0]
        Q, _ = np.linalg.qr(A.T, mode="complete")
        Z = Q[:, len(work):]
    else:
        xp, Z = x_start.copy(), np.eye(n)
    if Z.shape[1] == 0:
        return xp
    Hr = Z.T @ G @ Z
    gr = Z.T @ (G @ xp + c)
    try:
        L = np.linalg.cholesky(Hr)
    except np.linalg.LinAlgError:
        return None
    pz = -np.linalg.solve(L.T, np.linalg.solve(L, gr))
    return xp + Z @ pz


def _polish(G, c, C, lo, hi, work, x, y_w):
    """Re-solve the KKT system of the final working set for full accuracy."""
    if not work:
        try:
            x_new = np.linalg.solve(G, -c)
            if np.allclose(G @ x_new, -c, atol=1e-12 * max(1, np.abs(c).max(initial=0))):
                x = x_new
        except np.linalg.LinAlgError:
            pass
        return x, np.zeros(0)
    A = C[[i for i, _ in work]]
    b = np.array([lo[i] if s != UPPER else hi[i] for i, s in work])
    n, k = G.shape[0], len(work)
    K = np.block([[G, -A.T], [A, np.zeros((k, k))]])
    rhs = np.concatenate([-c, b])
    try:
        sol = np.linalg.solve(K, rhs)
        for _ in range(2):
            sol = sol + np.linalg.solve(K, rhs - K @ sol)
    except np.linalg.LinAlgError:
        return x, y_w
    if not np.all(np.isfinite(sol)):
        return x, y_w
    x_new, y_new = sol[:n], sol[n:]
    # singular reduced Hessian: keep the iterate, refit multipliers only
    if np.abs(K @ sol - rhs).max() > 1e-9 * max(1.0, np.abs(rhs).max()):
        y_new = np.linalg.lstsq(A.T, G @ x + c, rcond=None)[0]
        return x, y_new
    return x_new, y_new


def _phase1(C, lo, hi, eq_keep, x, feas_tol, max_iter):
    """Minimize the maximum constraint violation t over (x, t)."""
    m, n = C.shape
    eq = lo == hi
    rows, rlo, rhi = [], [], []
    for i in eq_keep:
        rows.append(np.append(C[i], 0.0))
        rlo.append(lo[i])
        rhi.append(hi[i])
    neq = len(rows)
    for i in range(m):
        if eq[i]:
            continue
        if np.isfinite(lo[i]):
            rows.append(np.append(C[i], 1.0))
            rlo.append(lo[i])
            rhi.append(np.inf)
        if np.isfinite(hi[i]):
            rows.append(np.append(C[i], -1.0))
            rlo.append(-np.inf)
            rhi.append(hi[i])
    t_row = np.zeros(n + 1)
    t_row[-1] = 1.0
    rows.append(t_row)
    rlo.append(0.0)
    rhi.append(np.inf)
    P = np.array(rows)
    nrm = np.linalg.norm(P, axis=1)
    P = P / nrm[:, None]
    plo, phi = np.array(rlo) / nrm, np.array(rhi) / nrm
    G1 = np.zeros((n + 1, n + 1))
    c1 = np.zeros(n + 1)
    c1[-1] = 1.0
    t0 = _max_violation(C, lo, hi, x) * 1.01 + 1e-12
    z = np.append(x, t0)
    core = _Core(G1, c1, P, plo, phi, feas_tol, max_iter)
    work = [(i, EQUAL) for i in range(neq)]
    z, work, _, it, status = core.run(z, work)
    if status == "unbounded":
        status = NUMERICAL_FAILURE
    return z[:n], it, status


def _report(problem, status, x, y, norms, work, iterations, message):
    m = norms.size
    if y is None:
        y = np.zeros(m)
        res = float("nan")
    else:
        y = y / norms
        res = kkt_residual(problem, x, y)
    return SolveReport(status, np.asarray(x, dtype=float).copy(), y, iterations,
                       res, tuple((int(i), int(s)) for i, s in work), message,
                       problem.objective(x))
