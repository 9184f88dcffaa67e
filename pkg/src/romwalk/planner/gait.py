"""Plan containers shared by the sagittal and composed planners."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from ..rom.aslip import DSP, SSP, AslipState, dsp_accel, ssp_accel
from ..rom.params import RomParams, SpringLaw
from ..solver.qp import SolveReport


class PlanningError(RuntimeError):
    """A plan could not be produced; ``report`` holds the solver outcome."""

    def __init__(self, message, report: Optional[SolveReport] = None, reason: str = "", partial=None):
        super().__init__(message)
        self.report = report
        self.reason = reason
        self.partial = partial


@dataclass(frozen=True)
class GaitSpec:
    T_SSP: float = 0.4
    T_DSP: float = 0.1
    speed: Optional[float] = 0.5
    step_length: Optional[float] = None
    z_lo: float = 0.9
    z_hi: float = 1.1
    mu: float = 0.6
    N_SSP: int = 13
    N_DSP: int = 7
    # durations of the standing -> walking transition (None: reuse the gait's)
    transition_T_DSP: Optional[float] = 0.4
    transition_T_SSP: Optional[float] = None

    def __post_init__(self):
        if self.T_SSP <= 0 or self.T_DSP <= 0:
            raise ValueError("domain durations must be positive")
        if not self.z_lo < self.z_hi:
            raise ValueError("z_lo must be below z_hi")
        if self.N_SSP < 5 or self.N_DSP < 5:
            raise ValueError("node counts must be at least 5")
        if (self.speed is None) == (self.step_length is None):
            raise ValueError("give exactly one of speed and step_length")
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")
        for t in (self.transition_T_DSP, self.transition_T_SSP):
            if t is not None and t <= 0:
                raise ValueError("transition durations must be positive")

    @property
    def stride(self) -> float:
        """Distance between consecutive footholds."""
        if self.step_length is not None:
            return float(self.step_length)
        return float(self.speed) * (self.T_SSP + self.T_DSP)

    @property
    def period(self) -> float:
        return self.T_SSP + self.T_DSP


@dataclass(frozen=True)
class Phase:
    """Node data of one domain.

    ``X`` rows are full aSLIP state vectors ``[q, s, L, qd, sd, Ld]`` (per
    leg in DSP, trailing leg first); ``Ldd`` and ``u`` are per-leg inputs.
    ``feet`` are the stance-foot x positions.
    """

    domain: str
    t: np.ndarray
    X: np.ndarray
    Ldd: np.ndarray
    u: np.ndarray
    feet: np.ndarray

    @property
    def legs(self) -> int:
        return 1 if self.domain == SSP else 2

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def _parts(self):
        k = self.legs
        P = self.X.reshape(-1, 6, k)
        return [P[:, i, :] for i in range(6)]

    def state(self, i) -> AslipState:
        return AslipState.from_vector(self.domain, self.X[i], self.feet)

    def shifted(self, dt=0.0, dx=0.0) -> "Phase":
        return Phase(self.domain, self.t + dt, self.X, self.Ldd, self.u, self.feet + dx)

    def polar(self):
        q, s, L, qd, sd, Ld = self._parts()
        return L - s, q, Ld - sd, qd

    def com(self):
        r, q, _, _ = self.polar()
        return np.column_stack([self.feet[0] + r[:, 0] * np.sin(q[:, 0]), r[:, 0] * np.cos(q[:, 0])])

    def com_velocity(self):
        r, q, rd, qd = (a[:, 0] for a in self.polar())
        return np.column_stack([rd * np.sin(q) + r * qd * np.cos(q),
                                rd * np.cos(q) - r * qd * np.sin(q)])

    def leg_forces(self, law: SpringLaw):
        q, s, L, qd, sd, Ld = self._parts()
        return law.stiffness(L) * s + law.damping(L) * sd

    def normal_forces(self, law: SpringLaw):
        """Vertical ground reaction per stance foot, ankle torque included."""
        r, q, _, _ = self.polar()
        F = self.leg_forces(law)
        return F * np.cos(q) - self.u / r * np.sin(q)

    def com_acceleration(self, params: RomParams, law: SpringLaw):
        """Point-mass acceleration from the net contact force."""
        r, q, _, _ = self.polar()
        F = self.leg_forces(law)
        fx = np.sum(F * np.sin(q) + self.u / r * np.cos(q), axis=1)
        fz = np.sum(F * np.cos(q) - self.u / r * np.sin(q), axis=1)
        return np.column_stack([fx / params.m, fz / params.m - params.g])

    def derivatives(self, params: RomParams, law: SpringLaw):
        """Time derivative of every row of ``X``."""
        q, s, L, qd, sd, Ld = self._parts()
        r, rd = L - s, Ld - sd
        F = law.stiffness(L) * s + law.damping(L) * sd
        if self.legs == 1:
            rdd, qdd = ssp_accel(r, q, rd, qd, F, self.u, params.m, params.g)
        else:
            a = dsp_accel(r[:, 0], q[:, 0], rd[:, 0], qd[:, 0], F[:, 0], self.u[:, 0],
                          r[:, 1], q[:, 1], rd[:, 1], qd[:, 1], F[:, 1], self.u[:, 1],
                          params.m, params.g)
            rdd = np.column_stack([a[0], a[2]])
            qdd = np.column_stack([a[1], a[3]])
        return np.hstack([qd, sd, Ld, qdd, self.Ldd - rdd, self.Ldd])


@dataclass(frozen=True)
class PeriodicGait:
    """One SSP + DSP cycle of the point-foot aSLIP.

    The SSP stance foot is at x = 0 and the touchdown foot at
    ``step_length``; after liftoff the leading leg becomes the next SSP leg.
    """

    spec: GaitSpec
    params: RomParams
    law: SpringLaw
    ssp: Phase
    dsp: Phase
    report: SolveReport = field(compare=False, default=None)

    @property
    def phases(self):
        return (self.ssp, self.dsp)

    @property
    def step_length(self) -> float:
        return float(self.dsp.feet[1] - self.dsp.feet[0])

    @property
    def z0(self) -> float:
        """Time-averaged mass height (trapezoid over the nodes)."""
        tot = 0.0
        for ph in self.phases:
            tot += trapezoid(ph.com()[:, 1], ph.t)
        return float(tot / (self.ssp.duration + self.dsp.duration))

    @property
    def cost(self) -> float:
        return sum(_cost(ph) for ph in self.phases)


@dataclass(frozen=True)
class SagittalTransition:
    """Footed aSLIP plan over one DSP followed by one SSP."""

    params: RomParams
    law: SpringLaw
    dsp: Phase
    ssp: Phase
    report: SolveReport = field(compare=False, default=None)

    @property
    def phases(self):
        return (self.dsp, self.ssp)

    @property
    def z0(self) -> float:
        tot = sum(trapezoid(ph.com()[:, 1], ph.t) for ph in self.phases)
        return float(tot / (self.dsp.duration + self.ssp.duration))

    @property
    def cost(self) -> float:
        return sum(_cost(ph) for ph in self.phases)


@dataclass(frozen=True)
class TransitionPlan:
    sagittal: SagittalTransition
    lateral: object


def _cost(ph: Phase) -> float:
    dt = ph.t[1] - ph.t[0]
    return float(dt / 2 * np.sum(ph.Ldd ** 2 + ph.u ** 2))


__all__ = ["DSP", "SSP", "GaitSpec", "Phase", "PeriodicGait", "PlanningError",
           "SagittalTransition", "TransitionPlan"]
