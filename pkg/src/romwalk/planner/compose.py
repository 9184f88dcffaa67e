"""Stitch planar plans into one 3D mass reference.

The sagittal source supplies x, z, their derivatives and the vertical
force references; the lateral source supplies y. Within a node interval
the sagittal path is a quintic Hermite patch through the node positions,
velocities and accelerations, so the reference is C2 inside each domain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ..rom.aslip import DSP, SSP
from .gait import PeriodicGait, Phase, SagittalTransition
from .lateral import LateralTransition, P2Orbit

SEGMENT_TOL = 1e-9


def _other(side):
    return "L" if side == "R" else "R"


@dataclass
class _Piece:
    phase: Phase
    t0: float
    dx: float
    sides: tuple
    pos: np.ndarray = field(init=False)
    vel: np.ndarray = field(init=False)
    acc: np.ndarray = field(init=False)
    Fz: np.ndarray = field(init=False)

    def prepare(self, params, law):
        ph = self.phase
        self.pos = ph.com() + [self.dx, 0.0]
        self.vel = ph.com_velocity()
        self.acc = ph.com_acceleration(params, law)
        self.Fz = ph.normal_forces(law)

    @property
    def t(self):
        return self.t0 + self.phase.t - self.phase.t[0]

    @property
    def duration(self):
        return self.phase.duration


def _quintic(h, T, p0, v0, a0, p1, v1, a1):
    """Position, velocity, acceleration of the quintic Hermite patch at h in [0, 1]."""
    h2, h3, h4, h5 = h * h, h ** 3, h ** 4, h ** 5
    H = np.array([1 - 10 * h3 + 15 * h4 - 6 * h5, h - 6 * h3 + 8 * h4 - 3 * h5,
                  0.5 * h2 - 1.5 * h3 + 1.5 * h4 - 0.5 * h5, 10 * h3 - 15 * h4 + 6 * h5,
                  -4 * h3 + 7 * h4 - 3 * h5, 0.5 * h3 - h4 + 0.5 * h5])
    dH = np.array([-30 * h2 + 60 * h3 - 30 * h4, 1 - 18 * h2 + 32 * h3 - 15 * h4,
                   h - 4.5 * h2 + 6 * h3 - 2.5 * h4, 30 * h2 - 60 * h3 + 30 * h4,
                   -12 * h2 + 28 * h3 - 15 * h4, 1.5 * h2 - 4 * h3 + 2.5 * h4])
    ddH = np.array([-60 * h + 180 * h2 - 120 * h3, -36 * h + 96 * h2 - 60 * h3,
                    1 - 9 * h + 18 * h2 - 10 * h3, 60 * h - 180 * h2 + 120 * h3,
                    -24 * h + 84 * h2 - 60 * h3, 3 * h - 12 * h2 + 10 * h3])
    B = np.array([p0, T * v0, T * T * a0, p1, T * v1, T * T * a1])
    return H @ B, dH @ B / T, ddH @ B / (T * T)


class SagittalTrack:
    """Time-ordered chain of sagittal phases with side labels.

    ``sides`` lists the stance side of each leg of a phase (trailing first in
    DSP). Feet are shifted by ``dx`` so all pieces share one world frame.
    """

    def __init__(self, pieces: Sequence[_Piece], params, law):
        self.pieces = list(pieces)
        self.params, self.law = params, law
        for pc in self.pieces:
            pc.prepare(params, law)
        self.breaks = np.array([pc.t0 for pc in self.pieces] + [self.pieces[-1].t0 + self.pieces[-1].duration])

    @property
    def duration(self):
        return float(self.breaks[-1] - self.breaks[0])

    def segments(self):
        return [(pc.phase.domain, pc.duration) for pc in self.pieces]

    def piece_at(self, t):
        k = int(np.searchsorted(self.breaks, t, side="right") - 1)
        return self.pieces[min(max(k, 0), len(self.pieces) - 1)]

    def at(self, t):
        """Sagittal reference at time t: dict with p, v, a (x, z), forces and stance info."""
        pc = self.piece_at(t)
        tn = pc.t
        tt = min(max(float(t), tn[0]), tn[-1])
        i = int(np.clip(np.searchsorted(tn, tt, side="right") - 1, 0, tn.size - 2))
        T = tn[i + 1] - tn[i]
        h = (tt - tn[i]) / T
        p, v, a = _quintic(h, T, pc.pos[i], pc.vel[i], pc.acc[i], pc.pos[i + 1], pc.vel[i + 1], pc.acc[i + 1])
        Fz = (1 - h) * pc.Fz[i] + h * pc.Fz[i + 1]
        F = {"L": 0.0, "R": 0.0}
        feet = {}
        for leg, side in enumerate(pc.sides):
            F[side] = float(Fz[leg])
            feet[side] = float(pc.phase.feet[leg] + pc.dx)
        return {"p": p, "v": v, "a": a, "F_L": F["L"], "F_R": F["R"], "domain": pc.phase.domain,
                "sides": pc.sides, "feet": feet, "t_phase": tt - tn[0], "T_phase": pc.duration}

    def footholds(self):
        """[(time of touchdown, side, x)] for every foot placement, plus initial feet."""
        out = []
        for pc in self.pieces:
            for leg, side in enumerate(pc.sides):
                x = float(pc.phase.feet[leg] + pc.dx)
                if not any(s == side and abs(xx - x) < 1e-12 for _, s, xx in out):
                    out.append((pc.t0, side, x))
        return out


def periodic_pieces(gait: PeriodicGait, steps: int, first_side="R", t0=0.0, x0=0.0,
                    start_with_dsp=False) -> List[_Piece]:
    """Repeat the cycle ``steps`` times, alternating the stance side."""
    out = []
    ell = gait.step_length
    side = first_side
    t = t0
    for k in range(steps):
        dx = x0 + k * ell
        if not start_with_dsp:
            out.append(_Piece(gait.ssp, t, dx, (side,)))
            t += gait.ssp.duration
        out.append(_Piece(gait.dsp, t, dx, (side, _other(side))))
        t += gait.dsp.duration
        side = _other(side)
        if start_with_dsp:
            out.append(_Piece(gait.ssp, t, dx + ell, (side,)))
            t += gait.ssp.duration
    return out


def transition_pieces(plan: SagittalTransition, stance_side="R", t0=0.0) -> List[_Piece]:
    return [_Piece(plan.dsp, t0, 0.0, (_other(stance_side), stance_side)),
            _Piece(plan.ssp, t0 + plan.dsp.duration, 0.0, (stance_side,))]


class LateralTrack:
    """Piecewise lateral reference in world coordinates."""

    def __init__(self, parts: Sequence[Tuple[float, float, Callable]], segments, foot_y):
        self.parts = list(parts)   # (t_start, t_local_offset, at_fn)
        self._segments = list(segments)
        self.foot_y = dict(foot_y)

    def at(self, t):
        for ts, off, fn in reversed(self.parts):
            if t >= ts - 1e-15:
                return fn(t - ts + off)
        ts, off, fn = self.parts[0]
        return fn(t - ts + off)

    def segments(self):
        return list(self._segments)


def zero_lateral(segments):
    return LateralTrack([(0.0, 0.0, lambda t: (0.0, 0.0, 0.0))], segments, {"L": 0.0, "R": 0.0})


def p2_track(orbit: P2Orbit, steps: int, t0=0.0, phase_offset=0.0, first="SSP") -> LateralTrack:
    """P2 reference starting at right SSP (or at the following DSP when first="DSP")."""
    segs = []
    dom_cycle = [(SSP, orbit.T_SSP), (DSP, orbit.T_DSP)]
    if first == DSP:
        dom_cycle = dom_cycle[::-1]
    for _ in range(steps):
        segs += dom_cycle
    return LateralTrack([(t0, phase_offset, lambda t: orbit.at(t))], segs, {"R": 0.0, "L": orbit.w})


def lateral_transition_track(plan: LateralTransition, foot_y) -> LateralTrack:
    return LateralTrack([(0.0, 0.0, plan.at)], plan.segments(), foot_y)


def chain_lateral(first: LateralTrack, second: LateralTrack, t_switch: float) -> LateralTrack:
    parts = list(first.parts) + [(t_switch + ts, off, fn) for ts, off, fn in second.parts]
    return LateralTrack(parts, first.segments() + second.segments(), second.foot_y)


@dataclass
class ComposedTrajectory:
    """3D mass reference on a common grid plus exact evaluators."""

    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    F_L: np.ndarray
    F_R: np.ndarray
    domains: list
    sagittal: SagittalTrack = field(repr=False)
    lateral: LateralTrack = field(repr=False)

    @property
    def duration(self):
        return self.sagittal.duration

    def at(self, t):
        s = self.sagittal.at(t)
        y, yd, ydd = self.lateral.at(t)
        s = dict(s)
        s["p3"] = np.array([s["p"][0], y, s["p"][1]])
        s["v3"] = np.array([s["v"][0], yd, s["v"][1]])
        s["a3"] = np.array([s["a"][0], ydd, s["a"][1]])
        return s

    def swing_targets(self):
        """[(touchdown time, side, (x, y))] of every foot placement after the first."""
        out = []
        for t, side, x in self.sagittal.footholds():
            out.append((t, side, (x, self.lateral.foot_y.get(side, 0.0))))
        return out


def _merge_segments(segs):
    out = []
    for dom, T in segs:
        if out and out[-1][0] == dom:
            out[-1] = (dom, out[-1][1] + T)
        else:
            out.append((dom, float(T)))
    return out


def compose_3d(sagittal, lateral=None, dt: float = 0.005, steps: int = 2) -> ComposedTrajectory:
    """Resample a sagittal and a lateral source on one grid.

    ``sagittal`` is a :class:`SagittalTrack`, a :class:`PeriodicGait`
    (repeated ``steps`` times) or a :class:`SagittalTransition`; ``lateral``
    is a :class:`LateralTrack`, a :class:`P2Orbit`, a
    :class:`LateralTransition` or None for zero sway. Both must use the same
    domain sequence and durations.
    """
    if isinstance(sagittal, PeriodicGait):
        track = SagittalTrack(periodic_pieces(sagittal, steps), sagittal.params, sagittal.law)
    elif isinstance(sagittal, SagittalTransition):
        track = SagittalTrack(transition_pieces(sagittal), sagittal.params, sagittal.law)
    elif isinstance(sagittal, SagittalTrack):
        track = sagittal
    else:
        raise TypeError(f"unsupported sagittal source {type(sagittal).__name__}")
    if lateral is None:
        lat = zero_lateral(track.segments())
    elif isinstance(lateral, P2Orbit):
        lat = p2_track(lateral, steps)
    elif isinstance(lateral, LateralTransition):
        lat = lateral_transition_track(lateral, {"R": lateral.stance_foot_y, "L": lateral.stance_foot_y})
    elif isinstance(lateral, LateralTrack):
        lat = lateral
    else:
        raise TypeError(f"unsupported lateral source {type(lateral).__name__}")
    sa, la = _merge_segments(track.segments()), _merge_segments(lat.segments())
    if len(sa) != len(la) or any(a[0] != b[0] or abs(a[1] - b[1]) > SEGMENT_TOL for a, b in zip(sa, la)):
        raise ValueError(f"domain segmentation differs: sagittal {sa} vs lateral {la}")
    n = int(np.floor(track.duration / dt + 1e-9))
    t = track.breaks[0] + dt * np.arange(n + 1)
    if track.breaks[-1] - t[-1] > 1e-12:
        t = np.append(t, track.breaks[-1])
    pos = np.empty((t.size, 3))
    vel = np.empty((t.size, 3))
    FL, FR, doms = np.empty(t.size), np.empty(t.size), []
    for k, tk in enumerate(t):
        s = track.at(tk)
        y, yd, _ = lat.at(tk)
        pos[k] = (s["p"][0], y, s["p"][1])
        vel[k] = (s["v"][0], yd, s["v"][1])
        FL[k], FR[k] = s["F_L"], s["F_R"]
        doms.append(s["domain"])
    return ComposedTrajectory(t, pos, vel, FL, FR, doms, track, lat)
