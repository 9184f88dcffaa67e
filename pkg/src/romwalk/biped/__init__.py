"""Planar seven-link biped used for the dynamics embedding."""
from dataclasses import dataclass

import numpy as np

from .model import (
    KNEE_LIMITS,
    NQ,
    NU,
    SIDES,
    BipedModel,
    DegenerateContact,
    body_points,
    check_state,
    com,
    constrained_accel,
    contact_jacobian,
    dynamics_terms,
    impact_map,
    kinetic_energy,
    load_model,
    model_from_dict,
    potential_energy,
    sole_pose,
)
from .outputs import OutputSet, SwingReference, WalkingReference, actual_outputs, outputs, swing_reference
from .posture import leg_ik, posture, standing_posture


@dataclass(frozen=True)
class BipedState:
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        check_state(self.q, self.qd)
        object.__setattr__(self, "q", np.asarray(self.q, float).copy())
        object.__setattr__(self, "qd", np.asarray(self.qd, float).copy())

    def to_vector(self):
        return np.concatenate([self.q, self.qd])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, float)
        return cls(x[:NQ], x[NQ:])


@dataclass(frozen=True)
class ContactSet:
    left: bool
    right: bool

    @classmethod
    def for_domain(cls, domain, stance=("R",)):
        if domain == "DSP":
            return cls(True, True)
        if len(stance) != 1:
            raise ValueError("single support takes exactly one stance side")
        return cls(stance[0] == "L", stance[0] == "R")

    @property
    def sides(self):
        return tuple(s for s, on in (("L", self.left), ("R", self.right)) if on)

    @property
    def n_v(self):
        return 3 * len(self.sides)

    def __contains__(self, side):
        return side in self.sides

    def __iter__(self):
        return iter(self.sides)


__all__ = [
    "KNEE_LIMITS", "NQ", "NU", "SIDES", "BipedModel", "BipedState", "ContactSet", "DegenerateContact",
    "body_points", "check_state", "com", "constrained_accel", "contact_jacobian", "dynamics_terms",
    "impact_map", "kinetic_energy", "load_model", "model_from_dict", "potential_energy", "sole_pose",
    "OutputSet", "SwingReference", "WalkingReference", "actual_outputs", "outputs", "swing_reference",
    "leg_ik", "posture", "standing_posture",
]
