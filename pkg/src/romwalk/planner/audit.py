"""Feasibility audits that re-evaluate plans outside the optimizer.

These use the per-state ``aslip_dynamics`` and the state maps, not the
vectorized transcription, so a bug in one path shows up in the other.
"""
from __future__ import annotations

import numpy as np

from ..rom.aslip import DSP, AslipInput, aslip_dynamics, aslip_liftoff
from .gait import PeriodicGait, Phase, SagittalTransition

# collocated entries of the full DSP vector [q1 q2 s1 s2 L1 L2 qd1 qd2 sd1 sd2 Ld1 Ld2]:
# the trailing leg plus the leading leg's actuator; the rest is geometry
_DSP_COLLOCATED = [0, 2, 4, 5, 6, 8, 10, 11]


def phase_defects(ph: Phase, params, law) -> np.ndarray:
    """Trapezoidal defects per interval (rows) over the collocated entries."""
    f = []
    for i in range(ph.t.size):
        st = ph.state(i)
        f.append(aslip_dynamics(st, AslipInput(ph.Ldd[i], ph.u[i]), params, law))
    f = np.array(f)
    dt = np.diff(ph.t)[:, None]
    d = ph.X[1:] - ph.X[:-1] - 0.5 * dt * (f[1:] + f[:-1])
    return d[:, _DSP_COLLOCATED] if ph.domain == DSP else d


def geometry_residual(ph: Phase) -> float:
    """Mismatch of the mass position seen from each DSP leg."""
    if ph.domain != DSP:
        return 0.0
    r, q, rd, qd = ph.polar()
    p1 = np.column_stack([ph.feet[0] + r[:, 0] * np.sin(q[:, 0]), r[:, 0] * np.cos(q[:, 0])])
    p2 = np.column_stack([ph.feet[1] + r[:, 1] * np.sin(q[:, 1]), r[:, 1] * np.cos(q[:, 1])])
    v1 = np.column_stack([rd[:, 0] * np.sin(q[:, 0]) + r[:, 0] * qd[:, 0] * np.cos(q[:, 0]),
                          rd[:, 0] * np.cos(q[:, 0]) - r[:, 0] * qd[:, 0] * np.sin(q[:, 0])])
    v2 = np.column_stack([rd[:, 1] * np.sin(q[:, 1]) + r[:, 1] * qd[:, 1] * np.cos(q[:, 1]),
                          rd[:, 1] * np.cos(q[:, 1]) - r[:, 1] * qd[:, 1] * np.sin(q[:, 1])])
    return float(max(np.abs(p1 - p2).max(), np.abs(v1 - v2).max()))


def periodicity_residual(gait: PeriodicGait) -> float:
    """Liftoff state, relabeled and shifted back one stride, vs the SSP start."""
    end = gait.dsp.state(gait.dsp.t.size - 1)
    nxt = aslip_liftoff(end, leg=0)
    start = gait.ssp.state(0)
    diff = nxt.to_vector() - start.to_vector()
    foot = nxt.feet[0] - gait.step_length - start.feet[0]
    return float(max(np.abs(diff).max(), abs(foot)))


def touchdown_residual(gait: PeriodicGait) -> float:
    """Trailing leg continuity and relaxed leading spring at touchdown."""
    a = gait.ssp.state(gait.ssp.t.size - 1)
    b = gait.dsp.state(0)
    cont = np.array([a.q[0] - b.q[0], a.s[0] - b.s[0], a.L[0] - b.L[0],
                     a.qd[0] - b.qd[0], a.sd[0] - b.sd[0], a.Ld[0] - b.Ld[0], b.s[1]])
    return float(np.abs(cont).max())


def audit_periodic(gait: PeriodicGait) -> dict:
    p, law, spec = gait.params, gait.law, gait.spec
    Fz = np.concatenate([ph.normal_forces(law).ravel() for ph in gait.phases])
    z = np.concatenate([ph.com()[:, 1] for ph in gait.phases])
    q = np.concatenate([ph.polar()[1].ravel() for ph in gait.phases])
    s = np.concatenate([ph.X.reshape(-1, 6, ph.legs)[:, 1, :].ravel() for ph in gait.phases])
    return {
        "defect": max(float(np.abs(phase_defects(ph, p, law)).max()) for ph in gait.phases),
        "geometry": geometry_residual(gait.dsp),
        "periodicity": periodicity_residual(gait),
        "touchdown": touchdown_residual(gait),
        "min_Fz": float(Fz.min()),
        "liftoff_F": float(gait.dsp.leg_forces(law)[-1, 0]),
        "z_range": (float(z.min()), float(z.max())),
        "friction": float(np.abs(np.tan(q)).max() - spec.mu),
        "spring": float(np.abs(s).max() - p.s_max),
        "step_length": gait.step_length,
    }


def zmp_margin(ph: Phase, params, law) -> float:
    """Smallest slack of -L_h F <= u <= L_t F with F the same node's normal force."""
    Fn = ph.normal_forces(law)
    return float(min(np.min(ph.u + params.L_h * Fn), np.min(params.L_t * Fn - ph.u)))


def audit_transition(plan: SagittalTransition, x_start, x_goal) -> dict:
    p, law = plan.params, plan.law
    first = plan.dsp.state(0)
    last = plan.ssp.state(plan.ssp.t.size - 1)
    lift = aslip_liftoff(plan.dsp.state(plan.dsp.t.size - 1), leg=0)
    u = np.concatenate([ph.u.ravel() for ph in plan.phases])
    return {
        "defect": max(float(np.abs(phase_defects(ph, p, law)).max()) for ph in plan.phases),
        "geometry": geometry_residual(plan.dsp),
        "start": float(np.abs(first.to_vector() - x_start.to_vector()).max()),
        "goal": float(np.abs(last.to_vector() - x_goal.to_vector()).max()),
        "liftoff": float(max(np.abs(lift.to_vector() - plan.ssp.state(0).to_vector()).max(),
                             abs(plan.dsp.leg_forces(law)[-1, 0]))),
        "zmp": min(zmp_margin(ph, p, law) for ph in plan.phases),
        "torque": float(p.u_y_max - np.abs(u).max()),
        "min_F": float(min(ph.leg_forces(law).min() for ph in plan.phases)),
    }
