import numpy as np
import pytest

from romwalk.biped import NQ, WalkingReference, dynamics_terms, outputs, standing_posture
from romwalk.clfqp import (
    ClfParams,
    ClfQpController,
    ControllerConfig,
    ControllerFailure,
    ForceReference,
    clf_derivative,
    clf_rows,
    force_band,
    grf_matrix,
    solve_control,
)
from romwalk.clfqp.core import _accel_affine, output_dynamics
from romwalk.pipeline import Pipeline, config_from_dict
from romwalk.rom import DSP
from romwalk.solver import OPTIMAL


@pytest.fixture(scope="module")
def start(tmp_path_factory):
    """Composed reference of the default preset and the matching standing posture."""
    cfg = config_from_dict({})
    pipe = Pipeline(cfg, tmp_path_factory.mktemp("ref"))
    pipe.run(["compose"])
    e = cfg.embedding
    refs = WalkingReference(pipe.results["compose"], pitch=e.pitch, apex=e.apex,
                            descent_ratio=e.descent_ratio, foot_offset=e.foot_offset)
    soles = {s: (-e.foot_offset, 0.0) for s in ("L", "R")}
    q0 = standing_posture(cfg.biped, pipe.results["standing"].com(), soles, e.pitch)
    return cfg, refs, q0


def test_clf_params_from_gains():
    p = ClfParams.from_gains(3, 100.0, 20.0)
    assert p.n == 3 and p.gamma > 0
    A = np.block([[np.zeros((3, 3)), np.eye(3)], [-100 * np.eye(3), -20 * np.eye(3)]])
    # closed-loop PD error decays at least at rate gamma
    rng = np.random.default_rng(1)
    for _ in range(20):
        eta = rng.normal(size=6)
        assert 2 * eta @ p.P @ A @ eta <= -p.gamma * p.V(eta) + 1e-9
    assert p.scaled(2.0).V(np.ones(6)) == pytest.approx(2 * p.V(np.ones(6)))


def test_clf_params_validation():
    with pytest.raises(ValueError, match="even"):
        ClfParams(np.eye(3), 1.0)
    with pytest.raises(ValueError, match="positive definite"):
        ClfParams(-np.eye(2), 1.0)
    with pytest.raises(ValueError, match="gamma"):
        ClfParams(np.eye(2), 0.0)
    with pytest.raises(ValueError):
        ClfParams.from_gains(2, Kp=-1.0)


def test_force_reference_and_band():
    fr = ForceReference({"L": 300.0, "R": 0.0}, 0.1)
    assert fr.bounds("L") == pytest.approx((270.0, 330.0))
    with pytest.raises(ValueError):
        ForceReference({"L": -1.0})
    with pytest.raises(ValueError):
        ForceReference({"L": 1.0}, c=1.5)
    A_v, b_v = np.arange(18.0).reshape(3, 6), np.array([1.0, 2.0, 3.0])
    A, lo, hi = force_band(100.0, 0.2, [0.0, 1.0, 0.0], A_v, b_v)
    np.testing.assert_array_equal(A, A_v[1:2])
    assert lo[0] == pytest.approx(78.0) and hi[0] == pytest.approx(118.0)


def test_grf_matrix_rows():
    C = grf_matrix(1, 0.6, 0.07, 0.13)
    inside = np.array([10.0, 500.0, 5.0])
    assert np.all(C @ inside <= 0)
    assert (C @ [0.0, -1.0, 0.0])[0] > 0          # pulling on the ground
    assert (C @ [400.0, 500.0, 0.0])[1] > 0       # slipping
    assert (C @ [0.0, 500.0, 80.0])[4] > 0        # pressure center past the toe
    assert (C @ [0.0, 500.0, -40.0])[3] > 0       # and past the heel
    assert grf_matrix(2, 0.6, 0.07, 0.13).shape == (10, 6)


def test_controller_config_validation():
    with pytest.raises(ValueError, match="u_lb"):
        ControllerConfig(u_lb=10.0, u_ub=5.0)
    with pytest.raises(ValueError, match="positive semidefinite"):
        ControllerConfig(H=-np.eye(6))
    with pytest.raises(ValueError, match="band"):
        ControllerConfig(band_c=0.0)
    assert ControllerConfig(rate_hz=500.0).dt == pytest.approx(0.002)


def test_static_start_solves_and_meets_the_bound(start):
    cfg, refs, q0 = start
    res = solve_control(cfg.biped, q0, np.zeros(NQ), 0.0, DSP, refs, cfg.controller)
    assert res.status == OPTIMAL and not res.fallback
    assert res.contacts == ("L", "R")
    assert res.V_dot <= res.bound + 1e-6
    assert res.grf_violation <= 1e-8
    assert np.all(res.u >= cfg.controller.u_lb - 1e-9) and np.all(res.u <= cfg.controller.u_ub + 1e-9)
    for i, s in enumerate(res.contacts):
        lo, hi = res.band[s]
        assert lo - 1e-6 <= res.F_v[3 * i + 1] <= hi + 1e-6


def test_clf_rows_match_the_derivative(start):
    cfg, refs, q0 = start
    res = solve_control(cfg.biped, q0, np.zeros(NQ), 0.0, DSP, refs, cfg.controller)
    k = refs.phase_at(0.0)
    out = outputs(cfg.biped, q0, np.zeros(NQ), 0.0, DSP, refs, k)
    Qu, q0_, _, _ = _accel_affine(cfg.biped, q0, np.zeros(NQ), ("L", "R"),
                                  dynamics_terms(cfg.biped, q0, np.zeros(NQ)))
    Lg, Lf = output_dynamics(out, Qu, q0_)
    params = ClfParams.from_gains(out.count)
    a, b, V = clf_rows(out, Lg, Lf, params)
    u = res.u
    # a u <= b is the same statement as V_dot <= -gamma V
    assert a @ u - b == pytest.approx(clf_derivative(out, Lg, Lf, params, u) + params.gamma * V, abs=1e-6)
    with pytest.raises(ValueError, match="outputs"):
        clf_rows(out, Lg, Lf, ClfParams.from_gains(out.count + 1))
    with pytest.raises(np.linalg.LinAlgError):
        clf_rows(out, np.zeros_like(Lg), Lf, params)


def test_controller_falls_back_then_gives_up(start):
    cfg, refs, q0 = start
    # the weight cannot be carried with 1 N m of torque and a tight force band
    tight = ControllerConfig(u_lb=-1.0, u_ub=1.0, max_infeasible=2, band_c=0.01, penalty=1.0)
    ctrl = ClfQpController(cfg.biped, refs, tight)
    qd = np.zeros(NQ)
    qd[1] = -2.0
    k = refs.phase_at(0.0)
    first = ctrl(0.0, q0, qd, DSP, k)
    if first.status == OPTIMAL:
        pytest.skip("instance unexpectedly feasible")
    assert first.fallback and np.all(first.u == 0.0)
    ctrl(0.0, q0, qd, DSP, k)
    with pytest.raises(ControllerFailure):
        ctrl(0.0, q0, qd, DSP, k)
