"""Walking outputs of the biped and the references they track.

Double support tracks the COM (x, z) and the torso pitch. Single support
adds the swing sole pose (x, z, pitch). Output errors are actual minus
desired.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..rom.aslip import DSP, SSP
from .model import NQ, BipedModel, com, sole_pose


def _other(side):
    return "L" if side == "R" else "R"


def _cubic(t, T, p0, v0, p1, v1):
    """Cubic Hermite segment evaluated at t in [0, T]: (p, v, a)."""
    h = t / T
    h2, h3 = h * h, h ** 3
    p = (2 * h3 - 3 * h2 + 1) * p0 + (h3 - 2 * h2 + h) * T * v0 + (-2 * h3 + 3 * h2) * p1 + (h3 - h2) * T * v1
    v = ((6 * h2 - 6 * h) * p0 + (3 * h2 - 4 * h + 1) * T * v0 + (-6 * h2 + 6 * h) * p1
         + (3 * h2 - 2 * h) * T * v1) / T
    a = ((12 * h - 6) * p0 + (6 * h - 4) * T * v0 + (6 - 12 * h) * p1 + (6 * h - 2) * T * v1) / (T * T)
    return p, v, a


@dataclass(frozen=True)
class SwingReference:
    """Swing sole pose (x, z, pitch) over one single-support phase.

    Horizontal motion and pitch are cubics with zero end velocities. The
    height rises on one cubic to the apex at mid-swing and comes down on a
    second that meets the ground with a downward speed of
    ``descent_ratio * apex / (T / 2)``, so touchdown is a clean crossing.
    """

    start: tuple
    end: tuple
    T: float
    apex: float = 0.05
    descent_ratio: float = 0.5

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("swing duration must be positive")
        if self.apex < 0:
            raise ValueError("apex height must be non-negative")

    @property
    def apex_z(self) -> float:
        return max(self.start[1], self.end[1]) + self.apex

    def at(self, t):
        t = min(max(float(t), 0.0), self.T)
        s0, s1 = np.asarray(self.start, float), np.asarray(self.end, float)
        p, v, a = np.empty(3), np.empty(3), np.empty(3)
        for i in (0, 2):
            p[i], v[i], a[i] = _cubic(t, self.T, s0[i], 0.0, s1[i], 0.0)
        half = 0.5 * self.T
        if t <= half:
            p[1], v[1], a[1] = _cubic(t, half, s0[1], 0.0, self.apex_z, 0.0)
        else:
            vt = -self.descent_ratio * self.apex / half
            p[1], v[1], a[1] = _cubic(t - half, half, self.apex_z, 0.0, s1[1], vt)
        return p, v, a


def swing_reference(start_pose, end_pose, T_SSP, apex=0.05, descent_ratio=0.5) -> SwingReference:
    return SwingReference(tuple(map(float, start_pose)), tuple(map(float, end_pose)),
                          float(T_SSP), float(apex), float(descent_ratio))


class WalkingReference:
    """Desired outputs along a composed plan.

    ``source`` is a :class:`~romwalk.planner.ComposedTrajectory` or a
    :class:`~romwalk.planner.SagittalTrack`; only the sagittal part is used.
    Phase ``k`` of the reference is the k-th planned domain. A planned foot
    at x puts the biped's sole point (below the ankle) at ``x - foot_offset``.
    """

    def __init__(self, source, pitch: float = 0.0, apex: float = 0.05, descent_ratio: float = 0.5,
                 foot_offset: float = 0.0):
        self.track = getattr(source, "sagittal", source)
        self.pitch = float(pitch)
        self.foot_offset = float(foot_offset)
        self.pieces = self.track.pieces
        self.breaks = self.track.breaks
        self._swing = {}
        for k, pc in enumerate(self.pieces):
            if pc.phase.domain == SSP:
                self._swing[k] = self._build_swing(k, apex, descent_ratio)

    @property
    def t_start(self):
        return float(self.breaks[0])

    @property
    def t_end(self):
        return float(self.breaks[-1])

    def __len__(self):
        return len(self.pieces)

    def domain(self, k):
        return self.pieces[k].phase.domain

    def phase_start(self, k):
        return float(self.breaks[k])

    def duration(self, k):
        return float(self.pieces[k].duration)

    def stance(self, k):
        return self.pieces[k].sides

    def swing_side(self, k):
        return _other(self.pieces[k].sides[0]) if self.domain(k) == SSP else None

    def foot_x(self, k, side):
        pc = self.pieces[k]
        for leg, s in enumerate(pc.sides):
            if s == side:
                return float(pc.phase.feet[leg] + pc.dx) - self.foot_offset
        return None

    def _build_swing(self, k, apex, descent_ratio):
        side = self.swing_side(k)
        stance_x = self.foot_x(k, self.pieces[k].sides[0])
        x0 = self.foot_x(k - 1, side) if k > 0 else None
        x1 = self.foot_x(k + 1, side) if k + 1 < len(self.pieces) else None
        if x0 is None and x1 is None:
            raise ValueError(f"phase {k}: no foothold for the swing foot")
        if x0 is None:
            x0 = 2 * stance_x - x1
        if x1 is None:
            x1 = 2 * stance_x - x0
        return swing_reference((x0, 0.0, 0.0), (x1, 0.0, 0.0), self.duration(k), apex, descent_ratio)

    def swing(self, k) -> Optional[SwingReference]:
        return self._swing.get(k)

    def phase_at(self, t) -> int:
        if t < self.t_start - 1e-12 or t > self.t_end + 1e-12:
            raise ValueError(f"t={t} outside the reference horizon [{self.t_start}, {self.t_end}]")
        k = int(np.searchsorted(self.breaks, t, side="right") - 1)
        return min(max(k, 0), len(self.pieces) - 1)

    def desired(self, t, k=None):
        """(y_d, dy_d, ddy_d) at reference time t within phase k."""
        if k is None:
            k = self.phase_at(t)
        elif t < self.breaks[k] - 1e-9 or t > self.breaks[k + 1] + 1e-9:
            raise ValueError(f"t={t} outside phase {k} [{self.breaks[k]}, {self.breaks[k + 1]}]")
        s = self._sagittal(t, k)
        y = [s["p"][0], s["p"][1], self.pitch]
        dy = [s["v"][0], s["v"][1], 0.0]
        ddy = [s["a"][0], s["a"][1], 0.0]
        sw = self._swing.get(k)
        if sw is not None:
            p, v, a = sw.at(t - self.breaks[k])
            y, dy, ddy = y + list(p), dy + list(v), ddy + list(a)
        return np.array(y), np.array(dy), np.array(ddy)

    def forces(self, t, k=None):
        """Planned vertical force per side at reference time t."""
        s = self._sagittal(t, self.phase_at(t) if k is None else k)
        return {"L": s["F_L"], "R": s["F_R"]}

    def _sagittal(self, t, k):
        # evaluate inside piece k even on a shared break point
        pc = self.pieces[k]
        lo, hi = self.breaks[k], self.breaks[k + 1]
        tt = min(max(float(t), lo), hi)
        if tt >= hi:
            tt = np.nextafter(hi, lo) if k + 1 < len(self.pieces) else hi
        out = self.track.at(tt)
        if out["domain"] != pc.phase.domain:
            raise RuntimeError("reference lookup landed in the wrong phase")
        return out


@dataclass(frozen=True)
class OutputSet:
    domain: str
    y: np.ndarray          # actual minus desired
    dy: np.ndarray
    J: np.ndarray          # d(actual)/dq
    Jdqd: np.ndarray       # J_dot q_dot
    ddy_d: np.ndarray      # desired second derivative

    @property
    def eta(self):
        return np.concatenate([self.y, self.dy])

    @property
    def count(self):
        return self.y.size


def actual_outputs(model: BipedModel, q, qd, domain, swing_side=None):
    """Actual output values, their Jacobian and J_dot q_dot."""
    p, Jc, Jdc = com(model, q, qd)
    e = np.zeros(NQ)
    e[2] = 1.0
    ya, J, Jd = [p, [q[2]]], [Jc, e[None, :]], [Jdc, [0.0]]
    if domain == SSP:
        if swing_side not in ("L", "R"):
            raise ValueError("single support needs the swing side")
        ps, Js, Jds = sole_pose(model, q, swing_side, qd)
        ya.append(ps)
        J.append(Js)
        Jd.append(Jds)
    elif domain != DSP:
        raise ValueError(f"unknown domain {domain!r}")
    return np.concatenate(ya), np.vstack(J), np.concatenate(Jd)


def outputs(model: BipedModel, q, qd, t, domain, refs: WalkingReference, k=None) -> OutputSet:
    """Output errors at state (q, qd) against the reference at time t."""
    q, qd = np.asarray(q, float), np.asarray(qd, float)
    if k is None:
        k = refs.phase_at(t)
    if refs.domain(k) != domain:
        raise ValueError(f"reference phase {k} is {refs.domain(k)}, not {domain}")
    ya, J, Jd = actual_outputs(model, q, qd, domain, refs.swing_side(k))
    yd, dyd, ddyd = refs.desired(t, k)
    return OutputSet(domain, ya - yd, J @ qd - dyd, J, Jd, ddyd)
