"""Control Lyapunov function QP for tracking the planned mass motion."""
from .core import (
    ClfParams,
    ClfQpController,
    ControllerConfig,
    ControllerFailure,
    ControlResult,
    ForceReference,
    clf_derivative,
    clf_rows,
    contact_force_affine,
    force_band,
    grf_matrix,
    output_dynamics,
    solve_control,
)

__all__ = [
    "ClfParams", "ClfQpController", "ControllerConfig", "ControllerFailure", "ControlResult",
    "ForceReference", "clf_derivative", "clf_rows", "contact_force_affine", "force_band", "grf_matrix",
    "output_dynamics", "solve_control",
]
