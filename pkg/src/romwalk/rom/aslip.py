"""Actuated spring-loaded inverted pendulum (aSLIP), point-foot and footed.

Angles are measured from the upward vertical through the foot: the point
mass sits at ``foot + r (sin q, cos q)``, so a positive angle puts the mass
ahead of its foot. Leg force is positive in compression. The point-foot
model is the footed one with zero ankle torque.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .params import RomParams, SpringLaw, spring_force

SSP = "SSP"
DSP = "DSP"


class SingularConfiguration(ValueError):
    """Leg length at or below the singularity guard."""


def _arr(v, k):
    a = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if a.shape != (k,):
        raise ValueError(f"expected {k} entries, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class AslipState:
    """aSLIP state with one (SSP) or two (DSP) stance legs.

    ``r = L - s`` is derived, never stored, so the length bookkeeping holds
    by construction. In DSP leg 0 is the trailing (older) stance leg.
    """

    domain: str
    q: np.ndarray
    s: np.ndarray
    L: np.ndarray
    qd: np.ndarray
    sd: np.ndarray
    Ld: np.ndarray
    feet: np.ndarray

    def __post_init__(self):
        if self.domain not in (SSP, DSP):
            raise ValueError(f"unknown domain {self.domain!r}")
        k = self.legs
        for name in ("q", "s", "L", "qd", "sd", "Ld", "feet"):
            object.__setattr__(self, name, _arr(getattr(self, name), k))

    @property
    def legs(self) -> int:
        return 1 if self.domain == SSP else 2

    @property
    def r(self):
        return self.L - self.s

    @property
    def rd(self):
        return self.Ld - self.sd

    @property
    def dq(self):
        """q1 - q2 in DSP, 0 in SSP."""
        return float(self.q[0] - self.q[1]) if self.legs == 2 else 0.0

    def to_vector(self):
        return np.concatenate([self.q, self.s, self.L, self.qd, self.sd, self.Ld])

    @classmethod
    def from_vector(cls, domain, x, feet):
        k = 1 if domain == SSP else 2
        x = np.asarray(x, dtype=float)
        if x.shape != (6 * k,):
            raise ValueError(f"{domain} state vector needs {6 * k} entries")
        parts = x.reshape(6, k)
        return cls(domain, *parts, feet=feet)

    def com(self):
        """Point-mass position (x, z) from the first stance leg."""
        r, q = self.r[0], self.q[0]
        return np.array([self.feet[0] + r * np.sin(q), r * np.cos(q)])

    def com_velocity(self):
        r, q, rd, qd = self.r[0], self.q[0], self.rd[0], self.qd[0]
        er = np.array([np.sin(q), np.cos(q)])
        eq = np.array([np.cos(q), -np.sin(q)])
        return rd * er + r * qd * eq

    def forces(self, law: SpringLaw):
        """Leg forces along each stance leg."""
        return spring_force(law, self.L, self.s, self.sd)

    def vertical_forces(self, law: SpringLaw):
        return self.forces(law) * np.cos(self.q)


@dataclass(frozen=True)
class AslipInput:
    Ldd: np.ndarray
    u: np.ndarray

    @classmethod
    def zeros(cls, legs):
        return cls(np.zeros(legs), np.zeros(legs))


def ssp_accel(r, q, rd, qd, F, u, m, g):
    """(r_ddot, q_ddot) of the single-stance leg; broadcasts over nodes."""
    rdd = F / m - g * np.cos(q) + r * qd ** 2
    qdd = (-2 * qd * rd + g * np.sin(q) + u / (m * r)) / r
    return rdd, qdd


def dsp_accel(r1, q1, rd1, qd1, F1, u1, r2, q2, rd2, qd2, F2, u2, m, g):
    """Double-stance accelerations of both legs; broadcasts over nodes."""
    dq = q1 - q2
    c, s = np.cos(dq), np.sin(dq)
    rdd1 = (F1 + F2 * c) / m - g * np.cos(q1) + r1 * qd1 ** 2 + u2 / (m * r2) * s
    qdd1 = ((-2 * qd1 * rd1 + g * np.sin(q1) - F2 / m * s) / r1
            + c / (m * r1 * r2) * u2 + u1 / (m * r1 ** 2))
    rdd2 = (F2 + F1 * c) / m - g * np.cos(q2) + r2 * qd2 ** 2 - u1 / (m * r1) * s
    qdd2 = ((-2 * qd2 * rd2 + g * np.sin(q2) + F1 / m * s) / r2
            + c / (m * r1 * r2) * u1 + u2 / (m * r2 ** 2))
    return rdd1, qdd1, rdd2, qdd2


def aslip_dynamics(state: AslipState, inp: AslipInput, params: RomParams, law: SpringLaw):
    """Time derivative of ``state.to_vector()`` under leg-length accelerations
    and ankle torques ``inp``.

    The DSP block is written per leg in its own polar frame; both legs
    describe the same point mass, so the four second-order equations are
    consistent whenever the state is.
    """
    m, g = params.m, params.g
    k = state.legs
    Ldd = _arr(inp.Ldd, k)
    u = _arr(inp.u, k)
    r, rd = state.r, state.rd
    if np.any(r <= params.r_min):
        raise SingularConfiguration(f"leg length {r.min():.4f} m <= r_min {params.r_min} m")
    q, qd = state.q, state.qd
    F = spring_force(law, state.L, state.s, state.sd)
    if k == 1:
        rdd, qdd = ssp_accel(r, q, rd, qd, F, u, m, g)
    else:
        rdd1, qdd1, rdd2, qdd2 = dsp_accel(r[0], q[0], rd[0], qd[0], F[0], u[0],
                                           r[1], q[1], rd[1], qd[1], F[1], u[1], m, g)
        rdd, qdd = np.array([rdd1, rdd2]), np.array([qdd1, qdd2])
    sdd = Ldd - rdd
    return np.concatenate([qd, state.sd, state.Ld, qdd, sdd, Ldd])


def leg_polar(com, com_vel, foot):
    """(r, q, r_dot, q_dot) of a leg from foot x position to the point mass."""
    dx, dz = com[0] - foot, com[1]
    r = np.hypot(dx, dz)
    q = np.arctan2(dx, dz)
    er = np.array([np.sin(q), np.cos(q)])
    eq = np.array([np.cos(q), -np.sin(q)])
    return r, q, float(com_vel @ er), float(com_vel @ eq) / r


def aslip_impact(state: AslipState, new_foot, L_new=None, Ld_new=0.0) -> AslipState:
    """Touchdown map SSP -> DSP for a new leg landing at x = ``new_foot``.

    The point-mass velocity is continuous; the new leg's polar rates are its
    projection into the new leg frame. ``L_new``/``Ld_new`` are the swing
    leg's commanded length and rate just before touchdown (default: a relaxed
    spring, L = r).
    """
    if state.domain != SSP:
        raise ValueError("touchdown map expects an SSP state")
    p = state.com()
    r1, q1, rd1, qd1 = state.r[0], state.q[0], state.rd[0], state.qd[0]
    dx = p[0] - new_foot
    r2 = float(np.hypot(dx, p[1]))
    if r2 <= 0:
        raise SingularConfiguration("new leg has zero length at touchdown")
    q2 = float(np.arctan2(dx, p[1]))
    dq = q1 - q2
    rd2 = rd1 * np.cos(dq) - qd1 * r1 * np.sin(dq)
    qd2 = (rd1 * np.sin(dq) + qd1 * r1 * np.cos(dq)) / r2
    L2 = r2 if L_new is None else float(L_new)
    s2 = L2 - r2
    sd2 = Ld_new - rd2
    return AslipState(
        DSP,
        q=[q1, q2], s=[state.s[0], s2], L=[state.L[0], L2],
        qd=[qd1, qd2], sd=[state.sd[0], sd2], Ld=[state.Ld[0], Ld_new],
        feet=[state.feet[0], new_foot],
    )


def aslip_liftoff(state: AslipState, leg: int = 0) -> AslipState:
    """Smooth DSP -> SSP map dropping stance leg ``leg``."""
    if state.domain != DSP:
        raise ValueError("liftoff map expects a DSP state")
    keep = 1 - leg
    return AslipState(SSP, q=state.q[keep], s=state.s[keep], L=state.L[keep],
                      qd=state.qd[keep], sd=state.sd[keep], Ld=state.Ld[keep],
                      feet=state.feet[keep])


def shift_feet(state: AslipState, dx: float) -> AslipState:
    return replace(state, feet=state.feet + dx)


def aslip_energy(state: AslipState, params: RomParams, law: SpringLaw) -> float:
    """Kinetic + gravitational + spring potential energy (spring: K(L) s^2 / 2)."""
    v = state.com_velocity()
    z = state.com()[1]
    spring = 0.5 * np.sum(law.stiffness(state.L) * state.s ** 2)
    return float(0.5 * params.m * v @ v + params.m * params.g * z + spring)


def aslip_power(state: AslipState, inp: AslipInput, law: SpringLaw):
    """(damping dissipation, actuation power) so that dE/dt is their sum."""
    F = spring_force(law, state.L, state.s, state.sd)
    damp = -np.sum(law.damping(state.L) * state.sd ** 2)
    act = np.sum(F * state.Ld + 0.5 * law.stiffness_slope(state.L) * state.Ld * state.s ** 2
                 + np.asarray(inp.u) * state.qd)
    return float(damp), float(act)
