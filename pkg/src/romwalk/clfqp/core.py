"""CLF-QP controller that embeds the planned mass motion into the biped.

One QP per control step over ``(u, delta)``:

    minimize    u'Hu + 2F'u + p delta^2
    subject to  CLF decrease row, relaxed by delta
                ground-reaction rows (unilateral, friction, center of pressure)
                vertical force band around the planned force
                torque limits
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from ..biped.model import NU, BipedModel, DegenerateContact, contact_jacobian, dynamics_terms
from ..biped.outputs import OutputSet, WalkingReference, outputs
from ..rom.aslip import DSP, SSP
from ..solver.qp import OPTIMAL, QpProblem, solve_qp


@dataclass(frozen=True)
class ClfParams:
    """Quadratic CLF V = eta' P eta on eta = [y; dy] for ``n`` outputs."""

    P: np.ndarray
    gamma: float
    Kp: float = 100.0
    Kd: float = 20.0

    def __post_init__(self):
        P = np.asarray(self.P, float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] % 2:
            raise ValueError("P must be square with an even size")
        if np.abs(P - P.T).max() > 1e-9 * max(1.0, np.abs(P).max()):
            raise ValueError("P must be symmetric")
        if np.linalg.eigvalsh(P).min() <= 0:
            raise ValueError("P must be positive definite")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "P", 0.5 * (P + P.T))

    @property
    def n(self):
        return self.P.shape[0] // 2

    @classmethod
    def from_gains(cls, n: int, Kp: float = 100.0, Kd: float = 20.0, rate_fraction: float = 0.8):
        """P from the Lyapunov equation of n double integrators under PD gains.

        The right-hand side is scaled with eps = 1/sqrt(Kp), Q = S S / eps
        with S = diag(I/eps, I), so position and velocity errors carry
        comparable weight. gamma is ``rate_fraction`` times the exact decay
        rate min(eta'Q eta / eta'P eta).
        """
        if Kp <= 0 or Kd <= 0:
            raise ValueError("PD gains must be positive")
        A = np.block([[np.zeros((n, n)), np.eye(n)], [-Kp * np.eye(n), -Kd * np.eye(n)]])
        eps = 1.0 / np.sqrt(Kp)
        S = np.diag(np.concatenate([np.full(n, 1.0 / eps), np.ones(n)]))
        Q = S @ S / eps
        P = solve_continuous_lyapunov(A.T, -Q)
        P = 0.5 * (P + P.T)
        rate = float(np.min(np.real(np.linalg.eigvals(np.linalg.solve(P, Q)))))
        return cls(P, rate_fraction * rate, Kp, Kd)

    def V(self, eta):
        return float(eta @ self.P @ eta)

    def scaled(self, alpha: float) -> "ClfParams":
        return ClfParams(alpha * self.P, self.gamma, self.Kp, self.Kd)


@dataclass(frozen=True)
class ForceReference:
    """Vertical force targets per stance foot with band coefficient ``c``."""

    F_ref: dict
    c: float = 0.1

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ValueError("band coefficient must lie in (0, 1)")
        for side, v in self.F_ref.items():
            if v < 0:
                raise ValueError(f"force reference for {side} is negative")

    def bounds(self, side):
        F = self.F_ref[side]
        return (1 - self.c) * F, (1 + self.c) * F


@dataclass(frozen=True)
class ControllerConfig:
    u_lb: np.ndarray = field(default_factory=lambda: np.full(NU, -400.0))
    u_ub: np.ndarray = field(default_factory=lambda: np.full(NU, 400.0))
    mu: float = 0.6
    L_h: float = 0.07
    L_t: float = 0.13
    penalty: float = 1e6
    H: np.ndarray = field(default_factory=lambda: np.eye(NU))
    F: np.ndarray = field(default_factory=lambda: np.zeros(NU))
    rate_hz: float = 1000.0
    band_c: float = 0.1
    band_domains: tuple = (DSP, SSP)
    max_infeasible: int = 20
    # weight of |ddy - ddy_PD|^2 added to u'Hu + 2F'u; 0 gives pure torque minimization
    tracking_weight: float = 1e3

    def __post_init__(self):
        lb = np.broadcast_to(np.asarray(self.u_lb, float), (NU,)).copy()
        ub = np.broadcast_to(np.asarray(self.u_ub, float), (NU,)).copy()
        if np.any(lb >= ub):
            raise ValueError("torque limits need u_lb < u_ub")
        H = np.asarray(self.H, float)
        if H.shape != (NU, NU) or np.linalg.eigvalsh(0.5 * (H + H.T)).min() < -1e-12:
            raise ValueError("H must be a 6 x 6 positive semidefinite matrix")
        if self.tracking_weight < 0:
            raise ValueError("tracking weight must be non-negative")
        if self.penalty <= 0 or self.mu <= 0 or self.rate_hz <= 0:
            raise ValueError("penalty, friction and rate must be positive")
        if not 0 < self.band_c < 1:
            raise ValueError("band coefficient must lie in (0, 1)")
        object.__setattr__(self, "u_lb", lb)
        object.__setattr__(self, "u_ub", ub)
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "F", np.broadcast_to(np.asarray(self.F, float), (NU,)).copy())

    @property
    def dt(self):
        return 1.0 / self.rate_hz


def contact_force_affine(model: BipedModel, q, qd, contacts, terms=None):
    """(A_v, b_v) with F_v = A_v u + b_v under the contact constraints."""
    M, h, B = terms if terms is not None else dynamics_terms(model, q, qd)
    J, Jd = contact_jacobian(model, q, qd, contacts)
    Minv_JT = np.linalg.solve(M, J.T)
    Minv_B = np.linalg.solve(M, B)
    Minv_h = np.linalg.solve(M, h)
    W = J @ Minv_JT
    if np.linalg.cond(W) > 1e12:
        raise DegenerateContact("J M^-1 J' is singular")
    A_v = -np.linalg.solve(W, J @ Minv_B)
    b_v = np.linalg.solve(W, J @ Minv_h - Jd)
    return A_v, b_v


def _accel_affine(model, q, qd, contacts, terms):
    """q_ddot = Qu u + q0 with contact forces eliminated."""
    M, h, B = terms
    J, _ = contact_jacobian(model, q, qd, contacts)
    if J.shape[0]:
        A_v, b_v = contact_force_affine(model, q, qd, contacts, terms)
    else:
        A_v, b_v = np.zeros((0, NU)), np.zeros(0)
    Qu = np.linalg.solve(M, B + J.T @ A_v)
    q0 = np.linalg.solve(M, J.T @ b_v - h)
    return Qu, q0, A_v, b_v


def output_dynamics(out: OutputSet, Qu, q0):
    """(Lg, Lf) of the output second derivative ddy = Lg u + Lf."""
    Lg = out.J @ Qu
    Lf = out.J @ q0 + out.Jdqd - out.ddy_d
    return Lg, Lf


def clf_rows(out: OutputSet, Lg, Lf, params: ClfParams):
    """CLF decrease as ``a @ u - delta <= b``. Returns (a, b, V)."""
    n = out.count
    if params.n != n:
        raise ValueError(f"CLF built for {params.n} outputs, got {n}")
    s = np.linalg.svd(Lg, compute_uv=False)
    if s.min() < 1e-9 * max(1.0, s.max()):
        raise np.linalg.LinAlgError("decoupling matrix is singular")
    eta = out.eta
    P = params.P
    V = float(eta @ P @ eta)
    Fm = np.block([[np.zeros((n, n)), np.eye(n)], [np.zeros((n, 2 * n))]])
    PG = P[:, n:]                       # P @ [0; I]
    drift = float(eta @ (Fm.T @ P + P @ Fm) @ eta)
    w = 2 * eta @ PG                    # row vector multiplying ddy
    a = w @ Lg
    b = -params.gamma * V - drift - float(w @ Lf)
    return a, b, V


def clf_derivative(out: OutputSet, Lg, Lf, params: ClfParams, u):
    """V_dot at input u."""
    n = out.count
    eta = out.eta
    ddy = Lg @ u + Lf
    eta_dot = np.concatenate([eta[n:], ddy])
    return float(2 * eta @ params.P @ eta_dot)


def force_band(F_ref: float, c: float, S_v, A_v, b_v):
    """Rows (A, lo, hi) enforcing (1-c)F_ref <= S_v (A_v u + b_v) <= (1+c)F_ref."""
    if not 0 < c < 1:
        raise ValueError("band coefficient must lie in (0, 1)")
    S_v = np.atleast_2d(np.asarray(S_v, float))
    A = S_v @ A_v
    off = S_v @ b_v
    return A, (1 - c) * F_ref - off, (1 + c) * F_ref - off


def grf_matrix(n_feet: int, mu: float, L_h: float, L_t: float):
    """C_v with C_v F_v <= 0 encoding F_z >= 0, friction and center of pressure."""
    blk = np.array([[0.0, -1.0, 0.0],
                    [1.0, -mu, 0.0],
                    [-1.0, -mu, 0.0],
                    [0.0, -L_h, -1.0],
                    [0.0, -L_t, 1.0]])
    return np.kron(np.eye(n_feet), blk)


@dataclass
class ControlResult:
    u: np.ndarray
    delta: float
    status: str
    V: float
    V_dot: float
    bound: float
    F_v: np.ndarray
    contacts: tuple
    band: dict
    grf_violation: float
    eta: np.ndarray
    fallback: bool = False
    active: tuple = ()


def solve_control(model: BipedModel, q, qd, t, domain, refs: WalkingReference, config: ControllerConfig,
                  params: Optional[ClfParams] = None, k=None, warm_start=None, band=True) -> ControlResult:
    """Assemble and solve the per-step QP at reference time ``t``.

    ``band=False`` drops the force-band rows. Raises ``ValueError`` when t
    is outside the reference.
    """
    q, qd = np.asarray(q, float), np.asarray(qd, float)
    if k is None:
        k = refs.phase_at(t)
    out = outputs(model, q, qd, t, domain, refs, k)
    params = params or ClfParams.from_gains(out.count)
    contacts = refs.stance(k)
    contacts = tuple(s for s in ("L", "R") if s in contacts)
    terms = dynamics_terms(model, q, qd)
    Qu, q0, A_v, b_v = _accel_affine(model, q, qd, contacts, terms)
    Lg, Lf = output_dynamics(out, Qu, q0)
    a, b, V = clf_rows(out, Lg, Lf, params)

    nf = len(contacts)
    rows, lo, hi = [], [], []
    Cv = grf_matrix(nf, config.mu, config.L_h, config.L_t)
    rows.append(np.hstack([Cv @ A_v, np.zeros((Cv.shape[0], 1))]))
    lo.append(np.full(Cv.shape[0], -np.inf))
    hi.append(-Cv @ b_v)
    rows.append(np.append(a, -1.0)[None, :])
    lo.append([-np.inf])
    hi.append([b])
    band_info = {}
    if band and domain in config.band_domains:
        Fr = refs.forces(t, k)
        fref = ForceReference({s: max(Fr[s], 0.0) for s in contacts}, config.band_c)
        for i, s in enumerate(contacts):
            S = np.zeros(3 * nf)
            S[3 * i + 1] = 1.0
            A, l, h_ = force_band(fref.F_ref[s], fref.c, S, A_v, b_v)
            rows.append(np.hstack([A, np.zeros((1, 1))]))
            lo.append(l)
            hi.append(h_)
            band_info[s] = fref.bounds(s)
    A_all = np.vstack(rows)
    H, F = config.H, config.F
    if config.tracking_weight > 0:
        v = -params.Kp * out.y - params.Kd * out.dy
        H = H + config.tracking_weight * Lg.T @ Lg
        F = F + config.tracking_weight * Lg.T @ (Lf - v)
        H = 0.5 * (H + H.T)
    G = 2 * np.block([[H, np.zeros((NU, 1))], [np.zeros((1, NU)), np.array([[config.penalty]])]])
    c = np.append(2 * F, 0.0)
    lb = np.append(config.u_lb, 0.0)
    ub = np.append(config.u_ub, np.inf)
    qp = QpProblem(G, c, ineq_constraints=(A_all, np.concatenate(lo), np.concatenate(hi)),
                   variable_bounds=(lb, ub))
    rep = solve_qp(qp, warm_start=warm_start)
    z = rep.solution
    u, delta = z[:NU].copy(), float(max(z[NU], 0.0))
    F_v = A_v @ u + b_v
    Vd = clf_derivative(out, Lg, Lf, params, u)
    viol = float(np.max(Cv @ F_v, initial=-np.inf)) if nf else 0.0
    return ControlResult(u, delta, rep.status, V, Vd, -params.gamma * V + delta, F_v, contacts,
                         band_info, max(viol, 0.0), out.eta, rep.status != OPTIMAL, rep.active_set)


class ClfQpController:
    """Stateful wrapper: warm starts, CLF per output count, and input fallback."""

    def __init__(self, model: BipedModel, refs: WalkingReference, config: ControllerConfig = ControllerConfig(),
                 Kp: float = 100.0, Kd: float = 20.0, band: bool = True):
        self.model, self.refs, self.config = model, refs, config
        self.band = band
        self.params = {n: ClfParams.from_gains(n, Kp, Kd) for n in (3, 6)}
        self._warm = {}
        self.u_prev = np.zeros(NU)
        self.infeasible_run = 0
        self.log = []

    def __call__(self, t_ref, q, qd, domain, k) -> ControlResult:
        n = 3 if domain == DSP else 6
        res = solve_control(self.model, q, qd, t_ref, domain, self.refs, self.config, self.params[n], k,
                            warm_start=self._warm.get(domain), band=self.band)
        if res.status != OPTIMAL:
            self.infeasible_run += 1
            if self.infeasible_run > self.config.max_infeasible:
                raise ControllerFailure(f"QP failed {self.infeasible_run} steps in a row at t_ref={t_ref:.4f}")
            res.u = self.u_prev.copy()
            res.fallback = True
        else:
            self.infeasible_run = 0
            self._warm[domain] = res.active
        self.u_prev = res.u.copy()
        return res


class ControllerFailure(RuntimeError):
    pass
