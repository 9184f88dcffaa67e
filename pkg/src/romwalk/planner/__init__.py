"""Motion generation on the reduced-order models."""
from .gait import GaitSpec, PeriodicGait, Phase, PlanningError, SagittalTransition, TransitionPlan
from .lateral import (
    LateralTransition,
    P2Orbit,
    identify_p2_orbit,
    p2_boundary,
    plan_transition_hlip,
    transition_qp,
)
from .sagittal import plan_periodic_aslip, plan_transition_aslip, standing_state

__all__ = [
    "GaitSpec", "PeriodicGait", "Phase", "PlanningError", "SagittalTransition", "TransitionPlan",
    "LateralTransition", "P2Orbit", "identify_p2_orbit", "p2_boundary", "plan_transition_hlip",
    "transition_qp", "plan_periodic_aslip", "plan_transition_aslip", "standing_state",
]
from .compose import (
    ComposedTrajectory,
    LateralTrack,
    SagittalTrack,
    chain_lateral,
    compose_3d,
    lateral_transition_track,
    p2_track,
    periodic_pieces,
    transition_pieces,
)
from .audit import audit_periodic, audit_transition, phase_defects

__all__ += [
    "ComposedTrajectory", "LateralTrack", "SagittalTrack", "chain_lateral", "compose_3d",
    "lateral_transition_track", "p2_track", "periodic_pieces", "transition_pieces",
    "audit_periodic", "audit_transition", "phase_defects",
]
