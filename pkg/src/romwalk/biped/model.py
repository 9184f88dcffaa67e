"""Planar seven-link biped: torso, and thigh/shank/foot per leg.

Generalized coordinates ``q = (x, z, pitch, hipL, kneeL, ankleL, hipR,
kneeR, ankleR)``. ``(x, z)`` is the hip joint and ``pitch`` the torso's
absolute angle. Joint angles are relative (child minus parent) and every
angle is counterclockwise in the x-z plane with x forward and z up. A leg
link at absolute angle 0 points straight down, and a foot at 0 is flat.
Knee flexion is therefore negative.

Each foot's contact reference is the sole point directly below the ankle.
Its holonomic rows are the sole point (x, z) and the foot pitch. The
matching contact wrench is ``(F_x, F_z, M)``, where ``M`` is the moment
about the sole point, so the center of pressure lies ``M / F_z`` ahead of it.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

NQ = 9
NU = 6
LEFT, RIGHT = "L", "R"
SIDES = (LEFT, RIGHT)
_JOINT0 = {LEFT: 3, RIGHT: 6}
KNEE_LIMITS = (-2.6, 0.05)


def _rot(th):
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s], [s, c]])


_J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class BipedModel:
    m_torso: float = 44.0
    m_thigh: float = 8.0
    m_shank: float = 3.5
    m_foot: float = 1.5
    l_torso_com: float = 0.30      # hip to torso COM
    l_torso: float = 0.60
    l_thigh: float = 0.40
    l_shank: float = 0.40
    c_thigh: float = 0.18          # joint to link COM, along the link
    c_shank: float = 0.18
    ankle_height: float = 0.05     # ankle above the sole
    L_h: float = 0.07
    L_t: float = 0.13
    g: float = 9.81
    I_torso: float = field(default=None)
    I_thigh: float = field(default=None)
    I_shank: float = field(default=None)
    I_foot: float = field(default=None)

    def __post_init__(self):
        defaults = {
            "I_torso": self.m_torso * self.l_torso ** 2 / 12,
            "I_thigh": self.m_thigh * self.l_thigh ** 2 / 12,
            "I_shank": self.m_shank * self.l_shank ** 2 / 12,
            "I_foot": self.m_foot * (self.L_h + self.L_t) ** 2 / 12,
        }
        for k, v in defaults.items():
            if getattr(self, k) is None:
                object.__setattr__(self, k, float(v))
        for k, v in asdict(self).items():
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"BipedModel.{k} must be positive, got {v}")
        object.__setattr__(self, "_bodies", self._build())

    @property
    def mass(self) -> float:
        return self.m_torso + 2 * (self.m_thigh + self.m_shank + self.m_foot)

    # -- kinematic description ------------------------------------------------
    def _build(self):
        """Bodies as (name, mass, inertia, angle selector a, chain).

        ``chain`` lists (angle selector, body-frame vector) terms whose sum,
        added to the hip, gives the body COM. Absolute angles are a . q.
        """
        def sel(*idx):
            a = np.zeros(NQ)
            a[list(idx)] = 1.0
            return a

        torso = sel(2)
        bodies = [("torso", self.m_torso, self.I_torso, torso,
                   [(torso, np.array([0.0, self.l_torso_com]))])]
        foot_com = np.array([0.5 * (self.L_t - self.L_h), -0.5 * self.ankle_height])
        for side in SIDES:
            j = _JOINT0[side]
            th, sh, ft = sel(2, j), sel(2, j, j + 1), sel(2, j, j + 1, j + 2)
            down_t = np.array([0.0, -self.l_thigh])
            down_s = np.array([0.0, -self.l_shank])
            bodies.append((f"thigh{side}", self.m_thigh, self.I_thigh, th,
                           [(th, np.array([0.0, -self.c_thigh]))]))
            bodies.append((f"shank{side}", self.m_shank, self.I_shank, sh,
                           [(th, down_t), (sh, np.array([0.0, -self.c_shank]))]))
            bodies.append((f"foot{side}", self.m_foot, self.I_foot, ft,
                           [(th, down_t), (sh, down_s), (ft, foot_com)]))
        return bodies

    def sole_chain(self, side):
        j = _JOINT0[side]
        th = np.zeros(NQ); th[[2, j]] = 1
        sh = th.copy(); sh[j + 1] = 1
        ft = sh.copy(); ft[j + 2] = 1
        return ft, [(th, np.array([0.0, -self.l_thigh])), (sh, np.array([0.0, -self.l_shank])),
                    (ft, np.array([0.0, -self.ankle_height]))]

    def to_dict(self):
        return asdict(self)


def load_model(path) -> BipedModel:
    """Read a BipedModel from the [biped] table of a TOML file."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return model_from_dict(doc.get("biped", {}))


def model_from_dict(table) -> BipedModel:
    names = set(BipedModel.__dataclass_fields__)
    unknown = set(table) - names
    if unknown:
        raise ValueError(f"unknown biped keys: {sorted(unknown)}")
    return BipedModel(**table)


# -- point kinematics ---------------------------------------------------------

def _point(q, qd, chain):
    """Position, Jacobian and J_dot q_dot of a point hip + sum R(a.q) v."""
    p = q[:2].copy()
    J = np.zeros((2, NQ))
    J[0, 0] = J[1, 1] = 1.0
    Jdqd = np.zeros(2)
    for a, v in chain:
        th = a @ q
        Rv = _rot(th) @ v
        p += Rv
        J += np.outer(_J @ Rv, a)
        if qd is not None:
            Jdqd -= Rv * (a @ qd) ** 2
    return p, J, Jdqd


def body_points(model: BipedModel, q, qd=None):
    """[(name, mass, inertia, angle selector, p, J, Jdot qdot)] for every body."""
    q = np.asarray(q, float)
    out = []
    for name, m, I, a, chain in model._bodies:
        p, J, Jd = _point(q, qd, chain)
        out.append((name, m, I, a, p, J, Jd))
    return out


def dynamics_terms(model: BipedModel, q, qd):
    """(M, h, B) of M q_ddot + h = B u + J_v^T F_v."""
    q, qd = np.asarray(q, float), np.asarray(qd, float)
    M = np.zeros((NQ, NQ))
    h = np.zeros(NQ)
    for name, m, I, a, p, J, Jd in body_points(model, q, qd):
        M += m * J.T @ J + I * np.outer(a, a)
        h += m * J.T @ Jd + m * model.g * J[1]
    B = np.zeros((NQ, NU))
    B[3:, :] = np.eye(NU)
    return 0.5 * (M + M.T), h, B


def kinetic_energy(model, q, qd):
    M, _, _ = dynamics_terms(model, q, np.zeros(NQ))
    qd = np.asarray(qd, float)
    return float(0.5 * qd @ M @ qd)


def potential_energy(model, q):
    return float(sum(m * model.g * p[1] for _, m, _, _, p, _, _ in body_points(model, q)))


def com(model, q, qd=None):
    """Whole-body COM position, Jacobian and J_dot q_dot."""
    q = np.asarray(q, float)
    P, J, Jd = np.zeros(2), np.zeros((2, NQ)), np.zeros(2)
    for _, m, _, _, p, Jb, Jdb in body_points(model, q, qd):
        P += m * p
        J += m * Jb
        Jd += m * Jdb
    return P / model.mass, J / model.mass, Jd / model.mass


def sole_pose(model, q, side, qd=None):
    """Sole point (x, z), foot pitch, the 3 x 9 Jacobian and J_dot q_dot."""
    q = np.asarray(q, float)
    a, chain = model.sole_chain(side)
    p, J, Jd = _point(q, qd, chain)
    pose = np.array([p[0], p[1], a @ q])
    return pose, np.vstack([J, a]), np.append(Jd, 0.0)


def contact_jacobian(model, q, qd, contacts):
    """Stacked (J_v, J_dot_v q_dot) over the feet in ``contacts`` (order L, R)."""
    rows, bias = [], []
    for side in SIDES:
        if side in contacts:
            _, J, Jd = sole_pose(model, q, side, qd)
            rows.append(J)
            bias.append(Jd)
    if not rows:
        return np.zeros((0, NQ)), np.zeros(0)
    return np.vstack(rows), np.concatenate(bias)


class DegenerateContact(np.linalg.LinAlgError):
    pass


def _kkt(M, J):
    k = J.shape[0]
    return np.block([[M, -J.T], [J, np.zeros((k, k))]])


def constrained_accel(model, q, qd, u, contacts):
    """(q_ddot, F_v) from the dynamics with the contact rows held."""
    M, h, B = dynamics_terms(model, q, qd)
    J, Jd = contact_jacobian(model, q, qd, contacts)
    rhs = np.concatenate([B @ np.asarray(u, float) - h, -Jd])
    try:
        sol = np.linalg.solve(_kkt(M, J), rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateContact(str(exc)) from exc
    return sol[:NQ], sol[NQ:]


def impact_map(model, q, qd_minus, new_contacts):
    """Plastic impact: post-impact velocity with all ``new_contacts`` at rest.

    Solves M (qd+ - qd-) = J^T Lambda with J qd+ = 0. Returns (qd+, Lambda).
    """
    M, _, _ = dynamics_terms(model, q, np.zeros(NQ))
    J, _ = contact_jacobian(model, q, None, new_contacts)
    if np.linalg.matrix_rank(J) < J.shape[0]:
        raise DegenerateContact("contact Jacobian is rank deficient at impact")
    rhs = np.concatenate([M @ np.asarray(qd_minus, float), np.zeros(J.shape[0])])
    sol = np.linalg.solve(_kkt(M, J), rhs)
    return sol[:NQ], sol[NQ:]


def check_state(q, qd=None):
    q = np.asarray(q, float)
    if q.shape != (NQ,) or not np.all(np.isfinite(q)):
        raise ValueError("q must be a finite 9-vector")
    if qd is not None:
        qd = np.asarray(qd, float)
        if qd.shape != (NQ,) or not np.all(np.isfinite(qd)):
            raise ValueError("qd must be a finite 9-vector")
    for side in SIDES:
        k = q[_JOINT0[side] + 1]
        if not KNEE_LIMITS[0] <= k <= KNEE_LIMITS[1]:
            raise ValueError(f"knee {side} angle {k:.3f} outside {KNEE_LIMITS}")
