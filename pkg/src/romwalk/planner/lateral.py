"""Lateral planning on the H-LIP: period-2 orbits and the transition QP."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from ..hybridsim import Edge, HybridSystem, integrate
from ..rom.hlip import DSP, SSP, hlip_discrete, ssp_flow
from ..rom.params import RomParams
from ..solver.qp import QpProblem, SolveReport, solve_qp

# Domain labels of the P2 cycle; the foot letter names the SSP stance foot,
# DSP labels name (old stance, new stance).
P2_DOMAINS = ("SSP_R", "DSP_RL", "SSP_L", "DSP_LR")


@dataclass(frozen=True)
class P2Orbit:
    """Period-2 lateral orbit starting at right-foot SSP.

    ``y`` is measured from the current stance foot. The right foot sits at
    world y = 0 and the left one at y = w, so the mass sways around w/2.
    """

    sigma2: float
    y0: float
    yd0: float
    w: float
    T_SSP: float
    T_DSP: float
    params: RomParams
    return_error: float = float("nan")

    @property
    def period(self) -> float:
        return 2.0 * (self.T_SSP + self.T_DSP)

    def segments(self, steps=2):
        out = []
        for k in range(steps):
            foot = "R" if k % 2 == 0 else "L"
            out.append((SSP, self.T_SSP, foot))
            out.append((DSP, self.T_DSP, foot))
        return out

    def at(self, t):
        """World-frame lateral (y, y_dot, y_ddot) at time ``t`` (periodic)."""
        lam = self.params.lam
        step = self.T_SSP + self.T_DSP
        t = float(t) % self.period
        k = min(int(t // step), 1)
        tau = t - k * step
        sign = 1.0 if k == 0 else -1.0
        foot = 0.0 if k == 0 else self.w
        y0, yd0 = sign * self.y0, sign * self.yd0
        if tau <= self.T_SSP:
            y, yd = ssp_flow(y0, yd0, lam, tau)
            return foot + y, yd, lam ** 2 * y
        ye, yde = ssp_flow(y0, yd0, lam, self.T_SSP)
        return foot + ye + yde * (tau - self.T_SSP), yde, 0.0

    def sample(self, dt=0.005):
        t = np.append(np.arange(0.0, self.period, dt), self.period)
        vals = np.array([self.at(tt) for tt in t[:-1]] + [self.at(0.0)])
        return t, vals[:, 0], vals[:, 1]

    def foot_positions(self):
        return {"R": 0.0, "L": self.w}


def p2_boundary(params: RomParams, T_SSP, T_DSP, w):
    """Closed-form (sigma2, y0, yd0) of the P2 orbit with step width ``w``.

    SSP from (y0, -sigma2 y0) ends at (y0, sigma2 y0) by symmetry of the
    cosh/sinh flow; DSP drifts by sigma2 y0 T_DSP; the foot change by w must
    land on the mirrored start (-y0, sigma2 y0).
    """
    lam = params.lam
    sigma2 = lam * np.tanh(T_SSP * lam / 2.0)
    y0 = w / (2.0 + sigma2 * T_DSP)
    return float(sigma2), float(y0), float(-sigma2 * y0)


def p2_hybrid_system(params: RomParams, T_SSP, T_DSP, w) -> HybridSystem:
    lam2 = params.lam ** 2

    def ssp(t, x, u):
        return np.array([x[1], lam2 * x[0]])

    def dsp(t, x, u):
        return np.array([x[1], 0.0])

    shift = np.array([w, 0.0])
    return HybridSystem(
        {"SSP_R": ssp, "DSP_RL": dsp, "SSP_L": ssp, "DSP_LR": dsp},
        [Edge("SSP_R", "DSP_RL", duration=T_SSP),
         Edge("DSP_RL", "SSP_L", duration=T_DSP, reset=lambda t, x: x - shift),
         Edge("SSP_L", "DSP_LR", duration=T_SSP),
         Edge("DSP_LR", "SSP_R", duration=T_DSP, reset=lambda t, x: x + shift)])


def identify_p2_orbit(params: RomParams, T_SSP: float, T_DSP: float, w: float,
                      verify: bool = True) -> P2Orbit:
    """P2 orbit for step width ``w``, checked by a two-step hybrid simulation."""
    if w < 0:
        raise ValueError("step width must be nonnegative")
    if T_SSP <= 0 or T_DSP <= 0:
        raise ValueError("domain durations must be positive")
    sigma2, y0, yd0 = p2_boundary(params, T_SSP, T_DSP, w)
    err = float("nan")
    if verify:
        traj = integrate(p2_hybrid_system(params, T_SSP, T_DSP, w), [y0, yd0], "SSP_R",
                         10.0 * (T_SSP + T_DSP), max_events=4)
        err = float(np.max(np.abs(traj.x_final - [y0, yd0])))
    return P2Orbit(sigma2, y0, yd0, float(w), float(T_SSP), float(T_DSP), params, err)


# --------------------------------------------------------------------------
# transition QP

Profile = Union[Sequence[float], np.ndarray, Callable[[float], float]]


@dataclass(frozen=True)
class LateralTransition:
    """Discrete lateral plan: node states Y^k and ankle torques per foot.

    ``y`` is measured from the stance foot of the SSP segment throughout, so
    the plan has no internal foot change. Interval k runs from t[k] to
    t[k+1] under domain ``domains[k]`` with torque u_L[k] + u_R[k] held.
    """

    t: np.ndarray
    Y: np.ndarray
    u_L: np.ndarray
    u_R: np.ndarray
    F_L: np.ndarray
    F_R: np.ndarray
    domains: tuple
    A: tuple
    B: tuple
    params: RomParams
    method: str
    report: SolveReport = field(compare=False, default=None)
    stance_foot_y: float = 0.0

    @property
    def N(self) -> int:
        return self.t.size

    @property
    def cost(self) -> float:
        return float(np.sum(self.u_L ** 2 + self.u_R ** 2))

    def dynamics_residual(self) -> float:
        res = 0.0
        for k in range(self.N - 1):
            nxt = self.A[k] @ self.Y[k] + self.B[k] * (self.u_L[k] + self.u_R[k])
            res = max(res, float(np.max(np.abs(self.Y[k + 1] - nxt))))
        return res

    def zmp_margin(self) -> float:
        """Smallest slack of the ZMP rows (negative means violated)."""
        p = self.params
        m = np.inf
        for u, F in ((self.u_L, self.F_L), (self.u_R, self.F_R)):
            m = min(m, np.min(u + p.W1 * F), np.min(p.W2 * F - u))
        return float(m)

    def at(self, t):
        """World-frame (y, y_dot, y_ddot) by exact flow inside each interval."""
        t = min(max(float(t), self.t[0]), self.t[-1])
        k = int(np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.N - 2))
        tau = t - self.t[k]
        u = self.u_L[k] + self.u_R[k]
        dom = self.domains[k]
        if tau > 0:
            A, B = hlip_discrete(self.params, dom, tau, self.method)
            y, yd = A @ self.Y[k] + B * u
        else:
            y, yd = self.Y[k]
        ydd = u / (self.params.m * self.params.z0)
        if dom == SSP:
            ydd += self.params.lam ** 2 * y
        return self.stance_foot_y + y, yd, ydd

    def segments(self):
        """[(domain, duration)] of consecutive equal-domain intervals."""
        out = []
        for k, dom in enumerate(self.domains):
            dt = float(self.t[k + 1] - self.t[k])
            if out and out[-1][0] == dom:
                out[-1] = (dom, out[-1][1] + dt)
            else:
                out.append((dom, dt))
        return out


def _grid(segments):
    t, doms = [0.0], []
    for dom, T, n in segments:
        if dom not in (SSP, DSP):
            raise ValueError(f"unknown domain {dom!r}")
        if T <= 0 or n < 1:
            raise ValueError("segments need positive duration and at least one interval")
        dt = T / n
        for i in range(n):
            t.append(t[-1] + dt)
            doms.append(dom)
    return np.array(t), tuple(doms)


def _profile(F, t):
    if callable(F):
        return np.array([float(F(tt)) for tt in t])
    F = np.asarray(F, float)
    if F.shape != t.shape:
        raise ValueError(f"force profile has {F.size} samples, grid has {t.size}")
    return F


def transition_qp(Y0, Yf, segments, F_L: Profile, F_R: Profile, params: RomParams,
                  method="exact", u_max=None):
    """Assemble the lateral transition QP.

    Variables are ordered [u_L (N), u_R (N), Y (2N)]. Returns the problem
    with its grid, interval domains, force samples and (A, B) lists.
    """
    t, doms = _grid(segments)
    N = t.size
    FL, FR = _profile(F_L, t), _profile(F_R, t)
    if np.any(FL < -1e-9) or np.any(FR < -1e-9):
        raise ValueError("normal force profiles must be nonnegative")
    u_max = params.u_x_max if u_max is None else float(u_max)
    n = 4 * N
    iY = lambda k: 2 * N + 2 * k  # noqa: E731
    As, Bs = [], []
    E = np.zeros((2 * (N - 1) + 4, n))
    e = np.zeros(E.shape[0])
    for k in range(N - 1):
        A, B = hlip_discrete(params, doms[k], t[k + 1] - t[k], method)
        As.append(A)
        Bs.append(B)
        rows = slice(2 * k, 2 * k + 2)
        E[rows, iY(k + 1):iY(k + 1) + 2] = np.eye(2)
        E[rows, iY(k):iY(k) + 2] = -A
        E[rows, k] = -B
        E[rows, N + k] = -B
    r = 2 * (N - 1)
    E[r:r + 2, iY(0):iY(0) + 2] = np.eye(2)
    e[r:r + 2] = Y0
    E[r + 2:r + 4, iY(N - 1):iY(N - 1) + 2] = np.eye(2)
    e[r + 2:r + 4] = Yf
    # ZMP rows: -W1 F <= u <= W2 F, per foot and node
    Z = np.zeros((2 * N, n))
    Z[:N, :N] = np.eye(N)
    Z[N:, N:2 * N] = np.eye(N)
    F = np.concatenate([FL, FR])
    lo_b = np.concatenate([np.full(2 * N, -u_max), np.full(2 * N, -np.inf)])
    hi_b = np.concatenate([np.full(2 * N, u_max), np.full(2 * N, np.inf)])
    G = np.zeros((n, n))
    G[np.arange(2 * N), np.arange(2 * N)] = 2.0
    qp = QpProblem(G, np.zeros(n), eq_constraints=(E, e),
                   ineq_constraints=(Z, -params.W1 * F, params.W2 * F),
                   variable_bounds=(lo_b, hi_b))
    return qp, t, doms, FL, FR, As, Bs


def plan_transition_hlip(Y0, Yf, segments, F_L: Profile, F_R: Profile, params: RomParams,
                         method: str = "exact", u_max=None, stance_foot_y: float = 0.0
                         ) -> LateralTransition:
    """Minimum-torque lateral transition between H-LIP states.

    ``segments`` lists ``(domain, duration, intervals)``; F_L/F_R are the
    normal forces at the grid nodes (arrays) or callables of time. The force
    sum does not have to equal m g. The QP is solved once.
    """
    Y0, Yf = np.asarray(Y0, float), np.asarray(Yf, float)
    qp, t, doms, FL, FR, As, Bs = transition_qp(Y0, Yf, segments, F_L, F_R, params, method, u_max)
    N = t.size
    rep = solve_qp(qp)
    x = rep.solution
    if not rep.ok:
        x = np.zeros(qp.n) if x is None else x
    Y = x[2 * N:].reshape(N, 2)
    return LateralTransition(t, Y, x[:N].copy(), x[N:2 * N].copy(), FL, FR, doms,
                             tuple(As), tuple(Bs), params, method, rep, float(stance_foot_y))
