"""Closed-form leg inverse kinematics and standing postures."""
from __future__ import annotations

import numpy as np

from .model import NQ, BipedModel, _JOINT0, com


def leg_ik(model: BipedModel, hip, sole, pitch=0.0, foot_pitch=0.0):
    """Joint angles (hip, knee, ankle) placing a flat-pitched sole at ``sole``.

    The knee bends forward (negative flexion). Raises ValueError when the
    ankle is out of reach.
    """
    l1, l2 = model.l_thigh, model.l_shank
    ankle = np.asarray(sole, float) + model.ankle_height * np.array([-np.sin(foot_pitch), np.cos(foot_pitch)])
    d = ankle - np.asarray(hip, float)
    D = float(np.hypot(*d))
    if not abs(l1 - l2) < D < l1 + l2:
        raise ValueError(f"ankle out of reach: distance {D:.4f} m")
    beta = np.arctan2(d[0], -d[1])
    phi = np.arccos((l1 ** 2 + D ** 2 - l2 ** 2) / (2 * l1 * D))
    psi = np.arccos((l2 ** 2 + D ** 2 - l1 ** 2) / (2 * l2 * D))
    a_thigh, a_shank = beta + phi, beta - psi
    return np.array([a_thigh - pitch, a_shank - a_thigh, foot_pitch - a_shank])


def posture(model: BipedModel, hip, soles, pitch=0.0):
    """Configuration with the hip at ``hip`` and both soles flat at ``soles``."""
    q = np.zeros(NQ)
    q[:2] = hip
    q[2] = pitch
    for side in ("L", "R"):
        j = _JOINT0[side]
        q[j:j + 3] = leg_ik(model, hip, soles[side], pitch)
    return q


def standing_posture(model: BipedModel, com_target, soles=None, pitch=0.0, tol=1e-12, max_iter=50):
    """Flat-footed configuration whose COM sits at ``com_target`` (x, z).

    Newton iteration on the hip position; ``soles`` maps side to sole (x, z)
    and defaults to both feet at the origin.
    """
    soles = soles or {"L": (0.0, 0.0), "R": (0.0, 0.0)}
    target = np.asarray(com_target, float)
    hip = target - np.array([0.0, 0.05])
    for _ in range(max_iter):
        q = posture(model, hip, soles, pitch)
        err = com(model, q)[0] - target
        if np.abs(err).max() < tol:
            return q
        e = 1e-7
        Jh = np.column_stack([(com(model, posture(model, hip + e * d, soles, pitch))[0]
                               - com(model, posture(model, hip - e * d, soles, pitch))[0]) / (2 * e)
                              for d in np.eye(2)])
        hip = hip - np.linalg.solve(Jh, err)
    raise ValueError(f"no standing posture reaches COM {tuple(target)}")
