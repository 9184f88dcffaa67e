"""Closed-loop simulation of the biped tracking a composed plan.

Each planned phase becomes one domain of a hybrid system. Liftoff happens
after the planned double-support duration; touchdown is the swing sole
reaching the ground and applies the plastic impact. The reference clock is
re-synchronized at every event: inside phase k it reads
``planned start of k + (t - actual start of k)``, clipped to the phase.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..biped.model import NQ, BipedModel, constrained_accel, impact_map, sole_pose
from ..biped.outputs import WalkingReference, actual_outputs
from ..hybridsim import Edge, HybridSystem, HybridTrajectory, integrate
from ..rom.aslip import DSP
from .core import ClfQpController, ControllerConfig, ControlResult

LOG_COLUMNS = ["t", "t_ref", "phase", "domain", "V", "V_dot", "bound", "delta", "fallback",
               "u0", "u1", "u2", "u3", "u4", "u5",
               "Fx_L", "Fz_L", "M_L", "Fx_R", "Fz_R", "M_R",
               "Fref_L", "Fref_R", "band_lo_L", "band_hi_L", "band_lo_R", "band_hi_R",
               "com_x", "com_z", "com_x_ref", "com_z_ref", "grf_violation", "active"]


def _name(k, dom):
    return f"{k}:{dom}"


def _parse(name):
    k, dom = name.split(":")
    return int(k), dom


@dataclass
class EmbeddingResult:
    trajectory: HybridTrajectory
    log: list
    refs: WalkingReference = field(repr=False)
    touchdowns: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def column(self, name):
        i = LOG_COLUMNS.index(name)
        return np.array([row[i] for row in self.log], dtype=float)

    @property
    def com_error(self):
        return np.hypot(self.column("com_x") - self.column("com_x_ref"),
                        self.column("com_z") - self.column("com_z_ref"))

    def rows(self):
        return [list(r) for r in self.log]


class _Clock:
    def __init__(self, refs):
        self.refs = refs
        self.entry = {}

    def enter(self, name, t):
        if name not in self.entry:
            self.entry[name] = t

    def t_ref(self, name, t):
        k, _ = _parse(name)
        lo, hi = self.refs.breaks[k], self.refs.breaks[k + 1]
        return float(min(max(lo + (t - self.entry.get(name, t)), lo), hi))


def build_system(model: BipedModel, refs: WalkingReference, clock: _Clock, overrun: float = 0.5):
    """Hybrid system with one domain per planned phase."""
    dyn, edges, forces = {}, [], {}
    n = len(refs)
    for k in range(n):
        dom = refs.domain(k)
        name = _name(k, dom)
        contacts = tuple(s for s in ("L", "R") if s in refs.stance(k))

        def f(t, x, u, _c=contacts):
            qdd, _ = constrained_accel(model, x[:NQ], x[NQ:], u, _c)
            return np.concatenate([x[NQ:], qdd])

        def fv(t, x, u, _c=contacts):
            _, F = constrained_accel(model, x[:NQ], x[NQ:], u, _c)
            out = np.full(6, np.nan)
            for i, s in enumerate(_c):
                j = 0 if s == "L" else 3
                out[j:j + 3] = F[3 * i:3 * i + 3]
            return out

        dyn[name], forces[name] = f, fv
        last = k + 1 == n
        if dom == DSP:
            target = name if last else _name(k + 1, refs.domain(k + 1))
            edges.append(Edge(name, target, duration=refs.duration(k), name=f"liftoff@{k}", terminal=last))
        else:
            side = refs.swing_side(k)
            T = refs.duration(k)
            nxt = name if last else _name(k + 1, refs.domain(k + 1))

            def guard(t, x, u, _s=side, _name=name, _T=T):
                z = sole_pose(model, x[:NQ], _s)[0][1]
                # disarmed during the first half of the swing
                if t - clock.entry.get(_name, t) < 0.5 * _T:
                    return max(z, 1e-3)
                return z

            def reset(t, x, _k=k):
                contacts_new = ("L", "R")
                qd_plus, _ = impact_map(model, x[:NQ], x[NQ:], contacts_new)
                return np.concatenate([x[:NQ], qd_plus])

            edges.append(Edge(name, nxt, guard=guard, direction=-1, reset=reset,
                              name=f"touchdown@{k}", terminal=last))
            edges.append(Edge(name, name, duration=T * (1 + overrun), name=f"timeout@{k}", terminal=True))
    return HybridSystem(dyn, edges, forces)


def simulate_embedding(model: BipedModel, refs: WalkingReference, q0, qd0,
                       config: ControllerConfig = ControllerConfig(), Kp=100.0, Kd=20.0,
                       band=True, t_end=None, rtol=1e-9, atol=1e-10) -> EmbeddingResult:
    """Run the closed loop from (q0, qd0) at the start of the reference."""
    ctrl = ClfQpController(model, refs, config, Kp, Kd, band)
    clock = _Clock(refs)
    system = build_system(model, refs, clock)
    log = []

    def controls(t, x, name):
        clock.enter(name, t)
        k, dom = _parse(name)
        tr = clock.t_ref(name, t)
        q, qd = x[:NQ], x[NQ:]
        res: ControlResult = ctrl(tr, q, qd, dom, k)
        log.append(_log_row(model, refs, t, tr, k, dom, q, qd, res))
        return res.u

    t0 = refs.t_start
    t_end = refs.t_end if t_end is None else t_end
    x0 = np.concatenate([q0, qd0])
    traj = integrate(system, x0, _name(0, refs.domain(0)), t_end, controls, t0=t0,
                     control_period=config.dt, rtol=rtol, atol=atol, record="samples")
    tds = [(e.t, e.edge) for e in traj.events]
    return EmbeddingResult(traj, log, refs, tds, {"Kp": Kp, "Kd": Kd, "band": band})


def _log_row(model, refs, t, tr, k, dom, q, qd, res: ControlResult):
    F = {"L": [np.nan] * 3, "R": [np.nan] * 3}
    for i, s in enumerate(res.contacts):
        F[s] = list(res.F_v[3 * i:3 * i + 3])
    Fr = refs.forces(tr, k)
    b = {s: res.band.get(s, (np.nan, np.nan)) for s in ("L", "R")}
    ya, _, _ = actual_outputs(model, q, qd, DSP)
    yd, _, _ = refs.desired(tr, k)
    return ([t, tr, k, dom, res.V, res.V_dot, res.bound, res.delta, int(res.fallback)] + list(res.u)
            + F["L"] + F["R"] + [Fr["L"], Fr["R"], b["L"][0], b["L"][1], b["R"][0], b["R"][1]]
            + [ya[0], ya[1], yd[0], yd[1], res.grf_violation, _active(res.active)])


def _active(active):
    """Active rows as 'index' plus l/u/e for lower, upper or equality."""
    tag = {1: "l", -1: "u", 0: "e"}
    return " ".join(f"{int(r)}{tag[int(s)]}" for r, s in (active or ()))
