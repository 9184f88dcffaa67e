"""Hybrid linear inverted pendulum (H-LIP) for lateral motion.

``y`` is the lateral offset of the mass from the stance foot (from the
foot that was stance in the preceding SSP while in DSP).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import RomParams

SSP = "SSP"
DSP = "DSP"
S2D = "S->D"
D2S = "D->S"


@dataclass(frozen=True)
class HlipState:
    y: float
    yd: float
    domain: str = SSP

    def __post_init__(self):
        if self.domain not in (SSP, DSP):
            raise ValueError(f"unknown domain {self.domain!r}")
        if not (np.isfinite(self.y) and np.isfinite(self.yd)):
            raise ValueError("H-LIP state must be finite")

    def to_vector(self):
        return np.array([self.y, self.yd])


def hlip_dynamics(state: HlipState, u_L: float = 0.0, u_R: float = 0.0,
                  params: RomParams = RomParams()) -> float:
    """Lateral acceleration. The foot not in contact must carry zero torque."""
    mz = params.m * params.z0
    if state.domain == SSP:
        return params.lam ** 2 * state.y + (u_L + u_R) / mz
    return (u_L + u_R) / mz


def hlip_impact(state: HlipState, transition: str, w: float = 0.0) -> HlipState:
    """S->D keeps (y, yd); D->S re-references y to the landing foot ``w`` away."""
    if transition == S2D:
        return HlipState(state.y, state.yd, DSP)
    if transition == D2S:
        return HlipState(state.y - w, state.yd, SSP)
    raise ValueError(f"unknown transition {transition!r}")


def hlip_discrete(params: RomParams, domain: str, T: float, method: str = "exact"):
    """Zero-order-hold discretization (A, B) over a step ``T``.

    ``method="exact"`` uses the matrix exponential of the continuous model;
    ``method="euler"`` is the first-order form A = [[1, T], [lam^2 T, 1]]
    with B = [T^2/2, T] / (m z0) in both domains.
    """
    mz = params.m * params.z0
    lam = params.lam
    if domain == DSP:
        return np.array([[1.0, T], [0.0, 1.0]]), np.array([T * T / 2, T]) / mz
    if domain != SSP:
        raise ValueError(f"unknown domain {domain!r}")
    if method == "euler":
        return np.array([[1.0, T], [lam ** 2 * T, 1.0]]), np.array([T * T / 2, T]) / mz
    if method != "exact":
        raise ValueError(f"unknown discretization {method!r}")
    ch, sh = np.cosh(lam * T), np.sinh(lam * T)
    A = np.array([[ch, sh / lam], [lam * sh, ch]])
    B = np.array([(ch - 1) / lam ** 2, sh / lam]) / mz
    return A, B


def ssp_flow(y0, yd0, lam, t):
    """Closed-form SSP flow of the passive H-LIP."""
    ch, sh = np.cosh(lam * t), np.sinh(lam * t)
    return y0 * ch + yd0 * sh / lam, y0 * lam * sh + yd0 * ch
