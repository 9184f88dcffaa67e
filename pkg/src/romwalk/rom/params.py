"""Parameter sets for the reduced-order models and their file format."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


# Leg-spring polynomials fitted on Cassie, highest power first (L^4 ... L^0).
CASSIE_STIFFNESS = (23309.0, 0.0, -55230.0, 48657.0, -9451.0)
CASSIE_DAMPING = (348.0, 0.0, -824.0, 726.0, -141.0)
CASSIE_MASS_RATIO = 2.28


@dataclass(frozen=True)
class SpringLaw:
    """Length-dependent leg spring: F = K(L) s + D(L) s_dot."""

    stiffness_coeffs: tuple = CASSIE_STIFFNESS
    damping_coeffs: tuple = CASSIE_DAMPING
    mass_ratio: float = CASSIE_MASS_RATIO

    def stiffness(self, L):
        return np.polyval(self.stiffness_coeffs, L) * self.mass_ratio

    def damping(self, L):
        return np.polyval(self.damping_coeffs, L) * self.mass_ratio

    def stiffness_slope(self, L):
        """dK/dL, used in the spring energy balance."""
        return np.polyval(np.polyder(self.stiffness_coeffs), L) * self.mass_ratio

    def check(self, L_range=(0.6, 1.2), samples=601):
        L = np.linspace(*L_range, samples)
        if np.any(self.stiffness(L) <= 0) or np.any(self.damping(L) <= 0):
            raise ValueError(f"spring law not positive on {L_range}")


def spring_force(law: SpringLaw, L, s, s_dot):
    """Leg force along the leg, positive when pushing the mass away from the foot."""
    return law.stiffness(L) * s + law.damping(L) * s_dot


@dataclass(frozen=True)
class RomParams:
    m: float = 70.0
    g: float = 9.81
    z0: float = 1.0
    L_h: float = 0.07
    L_t: float = 0.13
    W1: float = 0.05
    W2: float = 0.05
    u_y_max: float = 150.0
    u_x_max: float = 100.0
    mu: float = 0.6
    s_max: float = 0.15
    r_min: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"RomParams.{f.name} must be positive, got {v}")

    @property
    def lam(self) -> float:
        """Pendulum rate sqrt(g / z0)."""
        return float(np.sqrt(self.g / self.z0))

    @property
    def foot_length(self) -> float:
        return self.L_h + self.L_t

    def with_height(self, z0: float) -> "RomParams":
        return replace(self, z0=float(z0))


def _pick(cls, table):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return table


def params_from_dict(doc: dict):
    """Build (RomParams, SpringLaw) from a parsed parameter document."""
    rom = RomParams(**_pick(RomParams, doc.get("rom", {})))
    sp = dict(_pick(SpringLaw, doc.get("spring", {})))
    for key in ("stiffness_coeffs", "damping_coeffs"):
        if key in sp:
            sp[key] = tuple(float(v) for v in sp[key])
    law = SpringLaw(**sp)
    return rom, law


def load_params(path):
    """Read RomParams and SpringLaw from a TOML file with [rom] and [spring] tables.

    Missing keys fall back to the defaults (which embed the Cassie-derived
    spring polynomials).
    """
    with open(path, "rb") as fh:
        return params_from_dict(tomllib.load(fh))


def params_to_dict(rom: RomParams, law: SpringLaw) -> dict:
    sp = asdict(law)
    sp["stiffness_coeffs"] = list(sp["stiffness_coeffs"])
    sp["damping_coeffs"] = list(sp["damping_coeffs"])
    return {"rom": asdict(rom), "spring": sp}
