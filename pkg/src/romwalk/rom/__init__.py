"""Reduced-order walking models: aSLIP (sagittal) and H-LIP (lateral)."""
from .params import (
    CASSIE_DAMPING,
    CASSIE_MASS_RATIO,
    CASSIE_STIFFNESS,
    RomParams,
    SpringLaw,
    load_params,
    params_from_dict,
    params_to_dict,
    spring_force,
)
from .aslip import (
    DSP,
    SSP,
    AslipInput,
    AslipState,
    SingularConfiguration,
    aslip_dynamics,
    aslip_energy,
    aslip_impact,
    aslip_liftoff,
    aslip_power,
    leg_polar,
)
from .hlip import D2S, S2D, HlipState, hlip_discrete, hlip_dynamics, hlip_impact, ssp_flow

__all__ = [
    "CASSIE_DAMPING", "CASSIE_MASS_RATIO", "CASSIE_STIFFNESS", "RomParams", "SpringLaw",
    "load_params", "params_from_dict", "params_to_dict", "spring_force",
    "DSP", "SSP", "AslipInput", "AslipState", "SingularConfiguration", "aslip_dynamics",
    "aslip_energy", "aslip_impact", "aslip_liftoff", "aslip_power", "leg_polar",
    "D2S", "S2D", "HlipState", "hlip_discrete", "hlip_dynamics", "hlip_impact", "ssp_flow",
]
