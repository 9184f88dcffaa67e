"""Sagittal planning on the aSLIP by trapezoidal direct collocation.

Each domain is a block of nodes. SSP nodes carry the stance-leg state
``(q, s, L, qd, sd, Ld)``; DSP nodes carry the trailing leg's full state plus
the leading leg's actuator ``(L2, Ld2)``. The leading leg's angle, length
and rates follow from the geometry because both feet are pinned and a
fixed distance ``d`` apart. Inputs are leg-length accelerations and, for
the footed model, ankle torques.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..rom.aslip import DSP, SSP, AslipState, dsp_accel, ssp_accel
from ..rom.params import RomParams, SpringLaw
from ..solver import ColoredJacobian, NlpProblem, SqpOptions, detect_pattern, solve_nlp
from .gait import GaitSpec, PeriodicGait, Phase, PlanningError, SagittalTransition

# spring law fit range; leg lengths are kept inside it
L_RANGE = (0.6, 1.2)
RATE_MAX = 10.0
LDD_MAX = 1000.0
STATE_WEIGHT = 1.0


class _Block:
    """Variable layout of one domain."""

    def __init__(self, domain, n_nodes, T, offset, footed, d=0.0):
        self.domain = domain
        self.N = n_nodes
        self.T = float(T)
        self.dt = self.T / (n_nodes - 1)
        self.footed = footed
        self.d = float(d)
        self.nx = 6 if domain == SSP else 8
        self.nu = (1 if domain == SSP else 2) * (2 if footed else 1)
        self.width = self.nx + self.nu
        self.offset = offset
        self.size = self.N * self.width

    def split(self, z):
        B = z[self.offset:self.offset + self.size].reshape(self.N, self.width)
        return B[:, :self.nx], B[:, self.nx:]

    def index(self, node, col):
        return self.offset + node * self.width + col


def _dsp_geometry(x, d):
    """Leading-leg (r2, q2, rd2, qd2) from the trailing-leg state."""
    q1, s1, L1 = x[..., 0], x[..., 1], x[..., 2]
    qd1, sd1, Ld1 = x[..., 4], x[..., 5], x[..., 6]
    r1, rd1 = L1 - s1, Ld1 - sd1
    px, pz = r1 * np.sin(q1), r1 * np.cos(q1)
    vx = rd1 * np.sin(q1) + r1 * qd1 * np.cos(q1)
    vz = rd1 * np.cos(q1) - r1 * qd1 * np.sin(q1)
    dx = px - d
    r2 = np.hypot(dx, pz)
    q2 = np.arctan2(dx, pz)
    rd2 = vx * np.sin(q2) + vz * np.cos(q2)
    qd2 = (vx * np.cos(q2) - vz * np.sin(q2)) / r2
    return r2, q2, rd2, qd2


def _legs(block, x, uu):
    """Per-leg arrays (q, s, L, qd, sd, Ld, Ldd, u), each (N, legs)."""
    if block.domain == SSP:
        q, s, L, qd, sd, Ld = (x[:, i:i + 1] for i in range(6))
        Ldd = uu[:, 0:1]
        u = uu[:, 1:2] if block.footed else np.zeros_like(Ldd)
        return q, s, L, qd, sd, Ld, Ldd, u
    r2, q2, rd2, qd2 = _dsp_geometry(x, block.d)
    L2, Ld2 = x[:, 3], x[:, 7]
    col = lambda a, b: np.column_stack([a, b])  # noqa: E731
    q = col(x[:, 0], q2)
    s = col(x[:, 1], L2 - r2)
    L = col(x[:, 2], L2)
    qd = col(x[:, 4], qd2)
    sd = col(x[:, 5], Ld2 - rd2)
    Ld = col(x[:, 6], Ld2)
    Ldd = uu[:, 0:2]
    u = uu[:, 2:4] if block.footed else np.zeros_like(Ldd)
    return q, s, L, qd, sd, Ld, Ldd, u


def _xdot(block, x, uu, params, law):
    q, s, L, qd, sd, Ld, Ldd, u = _legs(block, x, uu)
    r, rd = L - s, Ld - sd
    F = law.stiffness(L) * s + law.damping(L) * sd
    m, g = params.m, params.g
    if block.domain == SSP:
        rdd, qdd = ssp_accel(r, q, rd, qd, F, u, m, g)
        return np.hstack([qd, sd, Ld, qdd, Ldd - rdd, Ldd])
    rdd1, qdd1, _, _ = dsp_accel(r[:, 0], q[:, 0], rd[:, 0], qd[:, 0], F[:, 0], u[:, 0],
                                 r[:, 1], q[:, 1], rd[:, 1], qd[:, 1], F[:, 1], u[:, 1], m, g)
    return np.column_stack([qd[:, 0], sd[:, 0], Ld[:, 0], Ld[:, 1],
                            qdd1, Ldd[:, 0] - rdd1, Ldd[:, 0], Ldd[:, 1]])


def _leg_vector(block, x, uu, node, leg):
    """(q, s, L, qd, sd, Ld) of one leg at one node."""
    parts = _legs(block, x[node:node + 1], uu[node:node + 1])[:6]
    return np.array([p[0, leg] for p in parts])


class _Transcription:
    """Cost, constraints and bounds over a chain of domain blocks."""

    def __init__(self, blocks, params: RomParams, law: SpringLaw, spec: GaitSpec):
        self.blocks = blocks
        self.params = params
        self.law = law
        self.spec = spec
        self.n = sum(b.size for b in blocks)
        self.links = []  # callables z -> (residual array, lo, hi)
        self.rows = None

    # -- rows ---------------------------------------------------------------
    def path_rows(self, z):
        """Defects, then force / height / friction / spring rows per block."""
        p, law = self.params, self.law
        mg = p.m * p.g
        eq, ineq = [], []
        for b in self.blocks:
            x, uu = b.split(z)
            f = _xdot(b, x, uu, p, law)
            eq.append((x[1:] - x[:-1] - 0.5 * b.dt * (f[1:] + f[:-1])).ravel())
            q, s, L, qd, sd, Ld, Ldd, u = _legs(b, x, uu)
            r = L - s
            F = law.stiffness(L) * s + law.damping(L) * sd
            ineq.append(F.ravel() / mg)                          # F >= 0
            ineq.append(r[:, 0] * np.cos(q[:, 0]))               # height
            if b.domain == DSP:
                ineq.append(q[:, 1])                             # friction, leading leg
                ineq.append(s[:, 1])                             # spring deflection
                ineq.append(r[:, 1])                             # singularity guard
            if b.footed:
                Fn = F * np.cos(q) - u / r * np.sin(q)
                ineq.append((u + p.L_h * Fn).ravel() / mg)        # heel side
                ineq.append((p.L_t * Fn - u).ravel() / mg)        # toe side
        return eq, ineq

    def path_bounds(self):
        p, spec = self.params, self.spec
        qmax = float(np.arctan(spec.mu))
        lo, hi = [], []
        for b in self.blocks:
            k = 1 if b.domain == SSP else 2
            lo.append(np.zeros(b.N * k)); hi.append(np.full(b.N * k, np.inf))
            lo.append(np.full(b.N, spec.z_lo)); hi.append(np.full(b.N, spec.z_hi))
            if b.domain == DSP:
                lo.append(np.full(b.N, -qmax)); hi.append(np.full(b.N, qmax))
                lo.append(np.full(b.N, -p.s_max)); hi.append(np.full(b.N, p.s_max))
                lo.append(np.full(b.N, p.r_min)); hi.append(np.full(b.N, np.inf))
            if b.footed:
                for _ in range(2):
                    lo.append(np.zeros(b.N * k)); hi.append(np.full(b.N * k, np.inf))
        return lo, hi

    def constraints(self, z):
        eq, ineq = self.path_rows(z)
        link = [np.atleast_1d(fn(z)) for fn, _, _ in self.links]
        return np.concatenate(eq + link + ineq)

    def bounds(self):
        eq_sizes = [(b.N - 1) * b.nx for b in self.blocks]
        lo = [np.zeros(sum(eq_sizes))]
        hi = [np.zeros(sum(eq_sizes))]
        for _, l, h in self.links:
            lo.append(np.atleast_1d(l)); hi.append(np.atleast_1d(h))
        plo, phi = self.path_bounds()
        return np.concatenate(lo + plo), np.concatenate(hi + phi)

    def variable_bounds(self):
        p, spec = self.params, self.spec
        qmax = float(np.arctan(spec.mu))
        lo, hi = np.empty(self.n), np.empty(self.n)
        for b in self.blocks:
            if b.domain == SSP:
                xl = [-qmax, -p.s_max, L_RANGE[0], -RATE_MAX, -RATE_MAX, -RATE_MAX]
                ul = [-LDD_MAX] + ([-p.u_y_max] if b.footed else [])
            else:
                xl = [-qmax, -p.s_max, L_RANGE[0], L_RANGE[0]] + [-RATE_MAX] * 4
                ul = [-LDD_MAX] * 2 + ([-p.u_y_max] * 2 if b.footed else [])
            xh = [-v for v in xl]
            xh[2] = L_RANGE[1]
            if b.domain == DSP:
                xh[3] = L_RANGE[1]
            uh = [-v for v in ul]
            row_lo, row_hi = np.array(xl + ul), np.array(xh + uh)
            lo[b.offset:b.offset + b.size] = np.tile(row_lo, b.N)
            hi[b.offset:b.offset + b.size] = np.tile(row_hi, b.N)
        return lo, hi

    def cost(self, z):
        tot = 0.0
        for b in self.blocks:
            _, uu = b.split(z)
            tot += 0.5 * b.dt * np.sum(uu ** 2)
        return float(tot)

    def cost_grad(self, z):
        g = np.zeros(self.n)
        for b in self.blocks:
            B = g[b.offset:b.offset + b.size].reshape(b.N, b.width)
            _, uu = b.split(z)
            B[:, b.nx:] = b.dt * uu
        return g

    def hessian_diag(self, state_weight=1.0):
        """Cost curvature on the inputs plus a small state weight (BFGS seed)."""
        d = np.full(self.n, float(state_weight))
        for b in self.blocks:
            B = d[b.offset:b.offset + b.size].reshape(b.N, b.width)
            B[:, b.nx:] = b.dt
        return d

    def problem(self, z_guess, fd_step=1e-6):
        lo, hi = self.bounds()
        zl, zh = self.variable_bounds()
        pattern = detect_pattern(self.constraints, np.clip(z_guess, zl, zh), h=fd_step)
        jac = ColoredJacobian(self.constraints, pattern, h=fd_step)
        return NlpProblem(self.n, self.cost, self.constraints, zl, zh, lo, hi,
                          cost_grad=self.cost_grad, jacobian=jac,
                          jacobian_mode="finite-difference")

    # -- results ------------------------------------------------------------
    def phase(self, b, z, feet, t0=0.0):
        x, uu = b.split(z)
        q, s, L, qd, sd, Ld, Ldd, u = _legs(b, x, uu)
        X = np.hstack([q, s, L, qd, sd, Ld])
        return Phase(b.domain, t0 + b.dt * np.arange(b.N), X, Ldd.copy(), u.copy(),
                     np.asarray(feet, float))


def _solve(tr: _Transcription, z0, options, what):
    prob = tr.problem(z0, options.fd_step)
    if options.initial_hessian is None:
        options = replace(options, initial_hessian=tr.hessian_diag(STATE_WEIGHT))
    z0 = np.clip(z0, prob.z_min, prob.z_max)
    rep = solve_nlp(prob, z0, options)
    if not rep.ok:
        viol = prob.violation(prob.constraints(rep.solution)) if rep.solution is not None else None
        raise PlanningError(f"{what}: solver ended with status {rep.status} ({rep.message})",
                            rep, reason=_violated_class(tr, viol), partial=rep.solution)
    return rep


def _violated_class(tr, viol):
    if viol is None or viol.size == 0:
        return ""
    names = []
    n_def = sum((b.N - 1) * b.nx for b in tr.blocks)
    names += ["dynamics"] * n_def
    for fn, lo, hi in tr.links:
        names += [getattr(fn, "label", "boundary")] * np.atleast_1d(lo).size
    for b in tr.blocks:
        k = 1 if b.domain == SSP else 2
        names += ["force"] * (b.N * k) + ["height"] * b.N
        if b.domain == DSP:
            names += ["friction"] * b.N + ["spring"] * b.N + ["leg length"] * b.N
        if b.footed:
            names += ["zmp"] * (2 * b.N * k)
    i = int(np.argmax(viol))
    return f"{names[i]} (violation {viol[i]:.3g})" if viol[i] > 0 else ""


def _label(fn, name):
    fn.label = name
    return fn


# -- initial guesses -----------------------------------------------------------

def _static_s(law, r, load):
    """Deflection carrying ``load`` N at leg length r + s (fixed point)."""
    s = np.zeros_like(np.asarray(r, float))
    for _ in range(20):
        s = load / law.stiffness(r + s)
    return s


def _guess_block(b, px, pz, vx, vz, share, params, law, foot=0.0):
    """Node values of block ``b`` for a mass path and a load share of leg 2."""
    mg = params.m * params.g
    dx = px - foot
    r1 = np.hypot(dx, pz)
    q1 = np.arctan2(dx, pz)
    rd1 = vx * np.sin(q1) + vz * np.cos(q1)
    qd1 = (vx * np.cos(q1) - vz * np.sin(q1)) / r1
    rows = np.zeros((b.N, b.width))
    if b.domain == SSP:
        s1 = _static_s(law, r1, mg)
        rows[:, :6] = np.column_stack([q1, s1, r1 + s1, qd1, np.zeros(b.N), rd1])
        return rows
    s1 = _static_s(law, r1, mg * (1 - share))
    x = np.column_stack([q1, s1, r1 + s1, np.zeros(b.N), qd1, np.zeros(b.N), rd1, np.zeros(b.N)])
    r2, _, rd2, _ = _dsp_geometry(x, b.d)
    s2 = _static_s(law, r2, mg * share)
    x[:, 3] = r2 + s2
    x[:, 7] = rd2
    rows[:, :8] = x
    return rows


def _pack(blocks, rows):
    return np.concatenate([r.ravel() for r in rows])


# -- periodic gait -----------------------------------------------------------------

def _precheck(spec: GaitSpec, params: RomParams):
    if spec.z_hi <= params.r_min or spec.z_lo >= L_RANGE[1]:
        raise PlanningError(f"height range [{spec.z_lo}, {spec.z_hi}] m is unreachable with leg "
                            f"lengths in [{max(params.r_min, L_RANGE[0])}, {L_RANGE[1]}] m",
                            reason="height", report=None)


def plan_periodic_aslip(spec: GaitSpec, params: RomParams, law: SpringLaw = SpringLaw(),
                        options: SqpOptions = None) -> PeriodicGait:
    """Minimum leg-actuation periodic walking cycle (SSP then DSP).

    Touchdown lands the leading leg with a relaxed spring a stride ahead of
    the stance foot; liftoff happens when the trailing leg's force reaches
    zero; the state after liftoff equals the SSP start, relabeled to the
    new stance leg.
    """
    _precheck(spec, params)
    options = options or SqpOptions(max_iter=300, constraint_tol=1e-9, optimality_tol=1e-6)
    ell = spec.stride
    bs = _Block(SSP, spec.N_SSP, spec.T_SSP, 0, False)
    bd = _Block(DSP, spec.N_DSP, spec.T_DSP, bs.size, False, d=ell)
    tr = _Transcription([bs, bd], params, law, spec)

    def td(z):
        xs, us = bs.split(z)
        xd, ud = bd.split(z)
        cont = xs[-1] - xd[0, [0, 1, 2, 4, 5, 6]]
        lead = _leg_vector(bd, xd, ud, 0, 1)
        return np.append(cont, lead[1])            # relaxed leading spring

    def lo(z):
        xd, ud = bd.split(z)
        xs, us = bs.split(z)
        trail = _leg_vector(bd, xd, ud, bd.N - 1, 0)
        lead = _leg_vector(bd, xd, ud, bd.N - 1, 1)
        F1 = law.stiffness(trail[2]) * trail[1] + law.damping(trail[2]) * trail[4]
        return np.append(F1 / (params.m * params.g), lead - xs[0])

    tr.links = [(_label(td, "touchdown"), np.zeros(7), np.zeros(7)),
                (_label(lo, "liftoff/periodicity"), np.zeros(7), np.zeros(7))]

    # guess: constant speed at mid height; SSP centred over the stance foot
    v = ell / spec.period
    zc = float(np.clip(0.5 * (spec.z_lo + spec.z_hi), params.r_min + 0.05, L_RANGE[1] - 0.05))
    xa = -0.5 * v * spec.T_SSP
    ts = np.linspace(0, spec.T_SSP, bs.N)
    tdsp = np.linspace(0, spec.T_DSP, bd.N)
    one = lambda n, c: np.full(n, c)  # noqa: E731
    rs = _guess_block(bs, xa + v * ts, one(bs.N, zc), one(bs.N, v), one(bs.N, 0.0), None, params, law)
    rd = _guess_block(bd, xa + v * (spec.T_SSP + tdsp), one(bd.N, zc), one(bd.N, v), one(bd.N, 0.0),
                      tdsp / spec.T_DSP, params, law)
    rep = _solve(tr, _pack(tr.blocks, [rs, rd]), options, "periodic gait")
    z = rep.solution
    return PeriodicGait(spec, params, law, tr.phase(bs, z, [0.0]),
                        tr.phase(bd, z, [0.0, ell], t0=spec.T_SSP), rep)


# -- footed transition ------------------------------------------------------------

def standing_state(params: RomParams, law: SpringLaw, height: float, share: float = 0.5,
                   feet=(0.0, 0.0), x=None) -> AslipState:
    """Static double-stance state with zero ankle torques.

    The mass sits at horizontal position ``x`` (default: between the feet).
    With separated feet the two leg forces follow from force balance; with
    coincident feet ``share`` is the weight fraction on the leading leg.
    """
    mg = params.m * params.g
    f = np.asarray(feet, float)
    xm = 0.5 * (f[0] + f[1]) if x is None else float(x)
    q = np.arctan2(xm - f, height)
    r = np.hypot(xm - f, height)
    M = np.array([np.sin(q), np.cos(q)])
    if abs(np.linalg.det(M)) < 1e-9:
        if abs(f[1] - f[0]) > 1e-12:
            raise ValueError("mass must not lie on the line through both feet")
        F = mg / np.cos(q) * np.array([1 - share, share])
    else:
        F = np.linalg.solve(M, [0.0, mg])
    if np.any(F < 0):
        raise ValueError("standing posture needs a pulling leg")
    s = _static_s(law, r, F)
    return AslipState(DSP, q=q, s=s, L=r + s, qd=[0, 0], sd=[0, 0], Ld=[0, 0], feet=f)


def plan_transition_aslip(x_start: AslipState, x_goal: AslipState, spec: GaitSpec,
                          params: RomParams, law: SpringLaw = SpringLaw(),
                          options: SqpOptions = None, T_DSP=None, T_SSP=None) -> SagittalTransition:
    """Footed aSLIP transition over one DSP then one SSP.

    ``x_start`` is a DSP state (trailing leg first), ``x_goal`` an SSP state
    on the leading leg's foot. The trailing leg lifts off when its force
    reaches zero. Cost adds the squared ankle torques to the leg actuation.
    """
    if x_start.domain != DSP or x_goal.domain != SSP:
        raise ValueError("transition goes from a DSP state to an SSP state")
    if abs(x_goal.feet[0] - x_start.feet[1]) > 1e-12:
        raise ValueError("goal stance foot must be the start's leading foot")
    options = options or SqpOptions(max_iter=300, constraint_tol=1e-9, optimality_tol=1e-6)
    T_DSP = T_DSP or spec.transition_T_DSP or spec.T_DSP
    T_SSP = T_SSP or spec.transition_T_SSP or spec.T_SSP
    f1, f2 = (float(v) for v in x_start.feet)
    d = f2 - f1
    # path rows see heights of both boundary states
    zs, zg = x_start.com()[1], x_goal.com()[1]
    spec_tr = _widen(spec, min(zs, zg), max(zs, zg))
    bd = _Block(DSP, spec.N_DSP, T_DSP, 0, True, d=d)
    bs = _Block(SSP, spec.N_SSP, T_SSP, bd.size, True)
    tr = _Transcription([bd, bs], params, law, spec_tr)
    start = x_start.to_vector().reshape(6, 2)          # rows q, s, L, qd, sd, Ld
    start_red = np.array([start[0, 0], start[1, 0], start[2, 0], start[2, 1],
                          start[3, 0], start[4, 0], start[5, 0], start[5, 1]])
    goal = x_goal.to_vector()

    def first(z):
        xd, _ = bd.split(z)
        return xd[0] - start_red

    def last(z):
        xs, _ = bs.split(z)
        return xs[-1] - goal

    def liftoff(z):
        xd, ud = bd.split(z)
        xs, _ = bs.split(z)
        trail = _leg_vector(bd, xd, ud, bd.N - 1, 0)
        lead = _leg_vector(bd, xd, ud, bd.N - 1, 1)
        F1 = law.stiffness(trail[2]) * trail[1] + law.damping(trail[2]) * trail[4]
        return np.append(F1 / (params.m * params.g), lead - xs[0])

    tr.links = [(_label(first, "start boundary"), np.zeros(8), np.zeros(8)),
                (_label(liftoff, "liftoff"), np.zeros(7), np.zeros(7)),
                (_label(last, "goal boundary"), np.zeros(6), np.zeros(6))]

    # guess: blend the mass from the start to the goal position and velocity
    p0, v0 = x_start.com(), x_start.com_velocity()
    p1, v1 = x_goal.com(), x_goal.com_velocity()
    T = T_DSP + T_SSP
    tt = np.concatenate([np.linspace(0, T_DSP, bd.N), T_DSP + np.linspace(0, T_SSP, bs.N)])
    h = tt / T
    h00, h10, h01, h11 = 2 * h**3 - 3 * h**2 + 1, h**3 - 2 * h**2 + h, -2 * h**3 + 3 * h**2, h**3 - h**2
    pos = np.outer(h00, p0) + np.outer(h10 * T, v0) + np.outer(h01, p1) + np.outer(h11 * T, v1)
    dh00, dh10 = (6 * h**2 - 6 * h) / T, 3 * h**2 - 4 * h + 1
    dh01, dh11 = (-6 * h**2 + 6 * h) / T, 3 * h**2 - 2 * h
    vel = np.outer(dh00, p0) + np.outer(dh10, v0) + np.outer(dh01, p1) + np.outer(dh11, v1)
    F0 = x_start.forces(law)
    share0 = float(F0[1] / max(F0.sum(), 1e-9))
    share = share0 + (1 - share0) * np.linspace(0, 1, bd.N)
    nd = bd.N
    rd_ = _guess_block(bd, pos[:nd, 0], pos[:nd, 1], vel[:nd, 0], vel[:nd, 1], share, params, law, foot=f1)
    rs_ = _guess_block(bs, pos[nd:, 0], pos[nd:, 1], vel[nd:, 0], vel[nd:, 1], None, params, law, foot=f2)
    rd_[0, :8] = start_red
    rs_[-1, :6] = goal
    rep = _solve(tr, _pack(tr.blocks, [rd_, rs_]), options, "transition")
    z = rep.solution
    return SagittalTransition(params, law, tr.phase(bd, z, [f1, f2]),
                              tr.phase(bs, z, [f2], t0=T_DSP), rep)


def _widen(spec: GaitSpec, zmin, zmax) -> GaitSpec:
    return replace(spec, z_lo=min(spec.z_lo, zmin - 1e-6), z_hi=max(spec.z_hi, zmax + 1e-6))
