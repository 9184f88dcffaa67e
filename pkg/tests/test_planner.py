import numpy as np
import pytest

from romwalk.planner import (
    GaitSpec,
    PlanningError,
    SagittalTrack,
    audit_transition,
    compose_3d,
    identify_p2_orbit,
    lateral_transition_track,
    p2_track,
    periodic_pieces,
    plan_periodic_aslip,
    plan_transition_aslip,
    plan_transition_hlip,
    standing_state,
)
from romwalk.planner.compose import chain_lateral
from romwalk.rom import DSP, SSP, RomParams, SpringLaw


def test_gait_spec_validation():
    with pytest.raises(ValueError, match="z_lo"):
        GaitSpec(z_lo=1.1, z_hi=0.9)
    with pytest.raises(ValueError, match="exactly one"):
        GaitSpec(speed=0.5, step_length=0.2)
    assert GaitSpec(speed=None, step_length=0.3).stride == 0.3
    assert GaitSpec(speed=0.5).stride == pytest.approx(0.25)


def test_gait_shape(default_gait):
    g, _ = default_gait
    assert g.step_length == pytest.approx(0.25, abs=1e-9)
    z = np.concatenate([ph.com()[:, 1] for ph in g.phases])
    assert z.min() >= 0.9 - 1e-6 and z.max() <= 1.1 + 1e-6
    # the trailing leg unloads gradually through double support
    F = g.dsp.normal_forces(g.law)[:, 0]
    assert F[0] > F[-1] and abs(F[-1]) < 1e-6
    assert g.ssp.duration == pytest.approx(0.4) and g.dsp.duration == pytest.approx(0.1)


def test_unreachable_height_fails_fast():
    with pytest.raises(PlanningError) as err:
        plan_periodic_aslip(GaitSpec(z_lo=1.5, z_hi=1.6), RomParams())
    assert err.value.reason == "height"


def test_standing_state_is_static():
    p, law = RomParams(), SpringLaw()
    xs = standing_state(p, law, 0.95)
    assert xs.domain == DSP
    np.testing.assert_allclose(xs.com(), [0.0, 0.95], atol=1e-12)
    np.testing.assert_allclose(xs.vertical_forces(law).sum(), p.m * p.g, rtol=1e-9)


def test_transition_audit(default_gait):
    g, _ = default_gait
    xs = standing_state(g.params, g.law, g.z0)
    goal = g.ssp.state(g.ssp.t.size - 1)
    tr = plan_transition_aslip(xs, goal, GaitSpec(speed=0.5), g.params, g.law)
    a = audit_transition(tr, xs, goal)
    assert a["start"] < 1e-6 and a["goal"] < 1e-6 and a["liftoff"] < 1e-6 and a["zmp"] > -1e-9
    assert tr.dsp.duration == pytest.approx(0.4)


def test_degenerate_orbit():
    o = identify_p2_orbit(RomParams(), 0.4, 0.1, 0.0)
    t, y, yd = o.sample()
    assert np.all(y == 0.0) and np.all(yd == 0.0)
    with pytest.raises(ValueError):
        identify_p2_orbit(RomParams(), 0.4, 0.1, -0.1)


def test_orbit_is_continuous_in_world_frame():
    o = identify_p2_orbit(RomParams(z0=0.9), 0.4, 0.1, 0.25)
    t = np.linspace(0, o.period, 2001)
    y = np.array([o.at(tt)[0] for tt in t])
    assert np.abs(np.diff(y)).max() < 1e-3
    # sway stays between the feet
    assert y.min() > 0 and y.max() < 0.25


def test_lateral_qp_reaches_target_and_respects_zmp():
    p = RomParams(z0=0.9)
    mg = p.m * p.g
    o = identify_p2_orbit(p, 0.4, 0.1, 0.2)
    goal = np.array(o.at(0.4)[:2])
    lat = plan_transition_hlip([0.1, 0.0], goal, [(DSP, 0.4, 20), (SSP, 0.4, 20)],
                               lambda t: mg * max(0.0, 1 - t / 0.4) * 0.5,
                               lambda t: mg * (1 - 0.5 * max(0.0, 1 - t / 0.4)), p)
    assert lat.report.ok
    np.testing.assert_allclose(lat.Y[-1], goal, atol=1e-9)
    assert lat.zmp_margin() > -1e-9 and lat.dynamics_residual() < 1e-10
    np.testing.assert_allclose(lat.at(0.8)[:2], goal, atol=1e-9)
    # the composed lateral reference hands over to the orbit without a jump
    track = chain_lateral(lateral_transition_track(lat, {"R": 0.0, "L": 0.2}),
                          p2_track(o, 2, phase_offset=0.4, first=DSP), 0.8)
    a, b = track.at(0.8 - 1e-9), track.at(0.8 + 1e-9)
    assert abs(a[0] - b[0]) < 1e-6 and abs(a[1] - b[1]) < 1e-6


def test_compose_columns_and_continuity(default_gait):
    g, _ = default_gait
    traj = compose_3d(g, identify_p2_orbit(g.params.with_height(g.z0), 0.4, 0.1, 0.2), dt=0.005, steps=2)
    assert traj.t[0] == 0.0 and traj.t[-1] == pytest.approx(1.0)
    assert traj.pos.shape == (traj.t.size, 3)
    assert np.abs(np.diff(traj.pos[:, 0])).max() < 0.01
    assert np.all(traj.F_L >= -1e-8) and np.all(traj.F_R >= -1e-8)
    # the x velocity is the derivative of x
    dx = np.gradient(traj.pos[:, 0], traj.t)
    assert np.abs(dx[2:-2] - traj.vel[2:-2, 0]).max() < 0.02
    assert traj.swing_targets()


def test_compose_rejects_mismatched_segments(default_gait):
    g, _ = default_gait
    o = identify_p2_orbit(g.params, 0.3, 0.1, 0.2)
    with pytest.raises(ValueError, match="segmentation"):
        compose_3d(g, o)


def test_track_pieces_alternate_sides(default_gait):
    g, _ = default_gait
    pcs = periodic_pieces(g, 3, first_side="R", start_with_dsp=True)
    assert [pc.phase.domain for pc in pcs] == [DSP, SSP] * 3
    assert [pc.sides for pc in pcs if pc.phase.domain == SSP] == [("L",), ("R",), ("L",)]
    track = SagittalTrack(pcs, g.params, g.law)
    assert track.duration == pytest.approx(1.5)
    assert track.at(0.05)["F_L"] > 0 and track.at(0.05)["F_R"] > 0
    assert track.at(0.3)["F_R"] == 0.0
