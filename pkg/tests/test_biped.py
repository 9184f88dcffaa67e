import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from romwalk.biped import (
    NQ,
    BipedModel,
    BipedState,
    ContactSet,
    SwingReference,
    com,
    constrained_accel,
    contact_jacobian,
    dynamics_terms,
    kinetic_energy,
    leg_ik,
    load_model,
    model_from_dict,
    posture,
    potential_energy,
    sole_pose,
    standing_posture,
)

MODEL = BipedModel()


def walking_q(rng):
    q = standing_posture(MODEL, (0.0, 0.8), {"L": (-0.1, 0.0), "R": (0.1, 0.0)})
    return q + rng.normal(scale=0.05, size=NQ)


def test_model_validation_and_file(tmp_path):
    assert MODEL.mass == pytest.approx(70.0)
    with pytest.raises(ValueError, match="m_torso"):
        BipedModel(m_torso=0.0)
    with pytest.raises(ValueError, match="unknown"):
        model_from_dict({"height": 1.0})
    path = tmp_path / "b.toml"
    path.write_text("[biped]\nm_torso = 40.0\n")
    assert load_model(path).m_torso == 40.0


def test_mass_matrix_symmetric_positive(rng):
    for _ in range(10):
        M, _, _ = dynamics_terms(MODEL, walking_q(rng), np.zeros(NQ))
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0


def test_gravity_is_potential_gradient(rng):
    q = walking_q(rng)
    _, h, _ = dynamics_terms(MODEL, q, np.zeros(NQ))
    grad = np.array([(potential_energy(MODEL, q + 1e-6 * e) - potential_energy(MODEL, q - 1e-6 * e)) / 2e-6
                     for e in np.eye(NQ)])
    np.testing.assert_allclose(h, grad, atol=1e-6)


def test_energy_rate_equals_actuator_power(rng):
    # unconstrained flight: dE/dt = qd' B u along the flow
    q, qd = walking_q(rng), rng.normal(size=NQ)
    u = rng.normal(scale=20.0, size=6)
    M, h, B = dynamics_terms(MODEL, q, qd)
    qdd = np.linalg.solve(M, B @ u - h)

    def E(s):
        qq, vv = q + s * qd + 0.5 * s * s * qdd, qd + s * qdd
        return kinetic_energy(MODEL, qq, vv) + potential_energy(MODEL, qq)

    eps = 1e-6
    assert (E(eps) - E(-eps)) / (2 * eps) == pytest.approx(qd @ B @ u, rel=1e-6, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["L", "R"]))
def test_sole_jacobian_and_bias(seed, side):
    rng = np.random.default_rng(seed)
    q, qd = walking_q(rng), rng.normal(size=NQ)
    pose, J, Jd = sole_pose(MODEL, q, side, qd)
    Jfd = np.column_stack([(sole_pose(MODEL, q + 1e-6 * e, side)[0] - sole_pose(MODEL, q - 1e-6 * e, side)[0]) / 2e-6
                           for e in np.eye(NQ)])
    np.testing.assert_allclose(J, Jfd, atol=1e-8)
    Jdot = (sole_pose(MODEL, q + 1e-6 * qd, side)[1] - sole_pose(MODEL, q - 1e-6 * qd, side)[1]) / 2e-6
    np.testing.assert_allclose(Jd, Jdot @ qd, atol=1e-6)


def test_com_jacobian(rng):
    q, qd = walking_q(rng), rng.normal(size=NQ)
    p, J, Jd = com(MODEL, q, qd)
    Jfd = np.column_stack([(com(MODEL, q + 1e-6 * e)[0] - com(MODEL, q - 1e-6 * e)[0]) / 2e-6 for e in np.eye(NQ)])
    np.testing.assert_allclose(J, Jfd, atol=1e-8)


def test_leg_ik_places_the_sole():
    hip = np.array([0.05, 0.78])
    for side, sole in (("L", (-0.1, 0.0)), ("R", (0.15, 0.02))):
        q = np.zeros(NQ)
        q[:2], q[2] = hip, 0.1
        j = 3 if side == "L" else 6
        q[j:j + 3] = leg_ik(MODEL, hip, sole, pitch=0.1)
        pose = sole_pose(MODEL, q, side)[0]
        np.testing.assert_allclose(pose, [sole[0], sole[1], 0.0], atol=1e-12)
        assert q[j + 1] < 0  # knee bends forward
    with pytest.raises(ValueError, match="reach"):
        leg_ik(MODEL, (0.0, 1.2), (0.0, 0.0))


def test_standing_posture_hits_com_target():
    soles = {"L": (-0.03, 0.0), "R": (-0.03, 0.0)}
    q = standing_posture(MODEL, (0.0, 0.8), soles)
    np.testing.assert_allclose(com(MODEL, q)[0], [0.0, 0.8], atol=1e-10)
    np.testing.assert_allclose(q[3:6], q[6:9])


def test_static_double_support_carries_the_weight():
    # straight legs under the hip: zero torque leaves the robot in equilibrium
    q = posture(MODEL, (0.0, 0.85), {"L": (0.0, 0.0), "R": (0.0, 0.0)})
    qdd, F = constrained_accel(MODEL, q, np.zeros(NQ), np.zeros(6), "LR")
    assert F[1] + F[4] == pytest.approx(MODEL.mass * MODEL.g, rel=1e-9)
    # straight knees are a kinematic singularity, so the solve is only accurate to ~1e-5
    np.testing.assert_allclose(qdd, 0.0, atol=1e-4)


def test_contact_rows_hold(rng):
    q, qd = walking_q(rng), rng.normal(size=NQ)
    J, Jd = contact_jacobian(MODEL, q, qd, ("R",))
    qdd, _ = constrained_accel(MODEL, q, qd, rng.normal(size=6), ("R",))
    np.testing.assert_allclose(J @ qdd + Jd, 0.0, atol=1e-9)


def test_state_and_contact_types():
    q = posture(MODEL, (0.0, 0.8), {"L": (0.0, 0.0), "R": (0.0, 0.0)})
    s = BipedState(q, np.zeros(NQ))
    np.testing.assert_array_equal(BipedState.from_vector(s.to_vector()).q, q)
    bad = q.copy()
    bad[4] = 0.5  # hyperextended knee
    with pytest.raises(ValueError, match="knee"):
        BipedState(bad, np.zeros(NQ))
    with pytest.raises(ValueError):
        BipedState(q[:5], np.zeros(5))
    c = ContactSet.for_domain("SSP", ("L",))
    assert c.sides == ("L",) and c.n_v == 3 and "L" in c and "R" not in c
    assert ContactSet.for_domain("DSP").n_v == 6


def test_swing_reference_profile():
    sw = SwingReference((0.0, 0.0, 0.0), (0.4, 0.0, 0.0), 0.4, apex=0.05, descent_ratio=0.5)
    p0, v0, _ = sw.at(0.0)
    pm, vm, _ = sw.at(0.2)
    p1, v1, _ = sw.at(0.4)
    np.testing.assert_allclose(p0, 0.0, atol=1e-15)
    np.testing.assert_allclose(p1, [0.4, 0.0, 0.0], atol=1e-15)
    assert pm[1] == pytest.approx(0.05) and vm[1] == pytest.approx(0.0, abs=1e-12)
    assert v1[1] == pytest.approx(-0.5 * 0.05 / 0.2)
    assert v0[0] == 0.0 and v1[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        SwingReference((0, 0, 0), (1, 0, 0), 0.0)
