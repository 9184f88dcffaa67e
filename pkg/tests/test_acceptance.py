"""Acceptance criteria 1-10, one PASS/FAIL line each.

Every check compares against an oracle computed here rather than the
quantity the library reports about itself.
"""
import itertools
import time

import numpy as np
from scipy.linalg import expm

from conftest import record
from romwalk.biped import BipedModel, constrained_accel, contact_jacobian, impact_map, kinetic_energy
from romwalk.biped import standing_posture
from romwalk.clfqp import contact_force_affine
from romwalk.planner import identify_p2_orbit, plan_transition_aslip, plan_transition_hlip, standing_state
from romwalk.planner import GaitSpec, audit_periodic
from romwalk.planner.audit import phase_defects
from romwalk.planner.lateral import transition_qp
from romwalk.rom import DSP, SSP, AslipInput, RomParams, aslip_dynamics
from romwalk.solver import NlpProblem, QpProblem, solve_nlp, solve_qp


# -- 1, 2: lateral P2 orbit ------------------------------------------------------

def _two_steps(p: RomParams, T_S, T_D, w, y0, yd0):
    """Right SSP, DSP, foot change, left SSP, DSP, foot change by matrix exponentials."""
    lam2 = p.g / p.z0
    S = expm(np.array([[0.0, 1.0], [lam2, 0.0]]) * T_S)
    D = np.array([[1.0, T_D], [0.0, 1.0]])
    x = D @ S @ np.array([y0, yd0]) - [w, 0.0]      # now measured from the left foot at +w
    x = D @ S @ x + [w, 0.0]                       # back to the right foot
    return x


def test_criterion_1_p2_orbit_random():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_ret, worst_char = 0.0, 0.0
    for _ in range(20):
        z0, T_S, T_D, w = rng.uniform(0.8, 1.1), rng.uniform(0.2, 0.6), rng.uniform(0.05, 0.2), rng.uniform(0.1, 0.4)
        p = RomParams(z0=z0)
        o = identify_p2_orbit(p, T_S, T_D, w)
        back = _two_steps(p, T_S, T_D, w, o.y0, o.yd0)
        worst_ret = max(worst_ret, float(np.abs(back - [o.y0, o.yd0]).max()), o.return_error)
        worst_char = max(worst_char, abs(o.yd0 + o.sigma2 * o.y0))
    elapsed = time.perf_counter() - t0
    ok = worst_ret <= 1e-8 and worst_char <= 1e-10 and elapsed < 5.0
    assert record(1, ok, f"return error {worst_ret:.2e}, characteristic {worst_char:.2e}, {elapsed:.2f} s")


def test_criterion_2_spot_values():
    p = RomParams(z0=1.0)
    o = identify_p2_orbit(p, 0.4, 0.1, 0.3)
    lam = np.sqrt(9.81 / 1.0)
    sigma2 = lam * np.tanh(lam * 0.4 / 2)
    y0 = 0.3 / (2 + sigma2 * 0.1)
    ref = np.array([sigma2, y0, -sigma2 * y0])
    got = np.array([o.sigma2, o.y0, o.yd0])
    stated = np.array([1.740, 0.1380, -0.2401])
    ok = abs(lam - 3.1321) < 1e-4 and np.abs(got - ref).max() <= 1e-3 and np.abs(got - stated).max() <= 1e-3
    assert record(2, ok, f"sigma2={o.sigma2:.4f} y0={o.y0:.4f} yd0={o.yd0:.4f}")


# -- 3, 4: sagittal plans ----------------------------------------------------------

def test_criterion_3_periodic_gait(default_gait):
    g, elapsed = default_gait
    p, law = g.params, g.law
    defect = max(float(np.abs(phase_defects(ph, p, law)).max()) for ph in g.phases)
    # Newton's law on the point mass agrees with the polar dynamics at each node
    newton = 0.0
    for ph in g.phases:
        acc = ph.com_acceleration(p, law)
        for i in range(ph.t.size):
            f = aslip_dynamics(ph.state(i), AslipInput(ph.Ldd[i], ph.u[i]), p, law)
            r, q, rd, qd = (a[i, 0] for a in ph.polar())
            k = ph.legs
            rdd = f[5 * k] - f[4 * k]   # Ldd - sdd
            qdd = f[3 * k]
            ax = (rdd - r * qd ** 2) * np.sin(q) + (r * qdd + 2 * rd * qd) * np.cos(q)
            az = (rdd - r * qd ** 2) * np.cos(q) - (r * qdd + 2 * rd * qd) * np.sin(q)
            newton = max(newton, abs(ax - acc[i, 0]), abs(az - acc[i, 1]))
    audit = audit_periodic(g)
    Fz = np.concatenate([ph.normal_forces(law).ravel() for ph in g.phases])
    F_lift = abs(g.dsp.leg_forces(law)[-1, 0])
    ok = (g.report.ok and defect <= 1e-6 and newton <= 1e-6 and audit["periodicity"] <= 1e-6
          and Fz.min() >= -1e-8 and F_lift <= 1e-6 and elapsed <= 30)
    assert record(3, ok, f"defect {defect:.1e}, periodicity {audit['periodicity']:.1e}, "
                         f"min Fz {Fz.min():.1e}, liftoff F {F_lift:.1e}, {elapsed:.1f} s")


def test_criterion_4_footed_transition(default_gait):
    g, _ = default_gait
    p, law = g.params, g.law
    xs = standing_state(p, law, g.z0)
    goal = g.ssp.state(g.ssp.t.size - 1)
    tr = plan_transition_aslip(xs, goal, GaitSpec(speed=0.5), p, law)
    start = float(np.abs(tr.dsp.state(0).to_vector() - xs.to_vector()).max())
    end = float(np.abs(tr.ssp.state(tr.ssp.t.size - 1).to_vector() - goal.to_vector()).max())
    zmp, torque = np.inf, np.inf
    for ph in tr.phases:
        # independent normal force: spring force projected plus the ankle torque's lever
        r, q, _, _ = ph.polar()
        qq, s, L, qd, sd, Ld = (ph.X.reshape(-1, 6, ph.legs)[:, i, :] for i in range(6))
        F = law.stiffness(L) * s + law.damping(L) * sd
        Fn = F * np.cos(q) - ph.u / r * np.sin(q)
        zmp = min(zmp, float(np.min(ph.u + p.L_h * Fn)), float(np.min(p.L_t * Fn - ph.u)))
        torque = min(torque, float(p.u_y_max - np.abs(ph.u).max()))
    defect = max(float(np.abs(phase_defects(ph, p, law)).max()) for ph in tr.phases)
    ok = start <= 1e-6 and end <= 1e-6 and defect <= 1e-6 and zmp >= -1e-9 and torque >= 0
    assert record(4, ok, f"boundary {max(start, end):.1e}, defect {defect:.1e}, "
                         f"ZMP slack {zmp:.1e}, torque slack {torque:.1f}")


# -- 5: lateral transition QP ----------------------------------------------------

def _kkt_oracle(qp: QpProblem, x_solver, tol=1e-9):
    """Dense KKT solve on the active rows found at the solver's point, with
    the multiplier signs checked so the oracle point is certified optimal."""
    C, lo, hi = qp.stacked()
    n, n_eq = qp.n, qp.n_eq
    v = C @ x_solver
    rows, rhs, sides = [], [], []
    for i in range(C.shape[0]):
        if i < n_eq or hi[i] - lo[i] <= tol:      # zero force pins the torque
            rows.append(i), rhs.append(lo[i]), sides.append(0)
        elif np.isfinite(lo[i]) and v[i] - lo[i] <= tol * max(1, abs(lo[i])):
            rows.append(i), rhs.append(lo[i]), sides.append(1)
        elif np.isfinite(hi[i]) and hi[i] - v[i] <= tol * max(1, abs(hi[i])):
            rows.append(i), rhs.append(hi[i]), sides.append(-1)
    A = C[rows]
    # drop dependent rows (a bound can coincide with a ZMP row at zero force)
    keep = []
    for j in range(len(rows)):
        if np.linalg.matrix_rank(A[keep + [j]]) == len(keep) + 1:
            keep.append(j)
    A, b, sg = A[keep], np.array(rhs)[keep], np.array(sides)[keep]
    K = np.block([[qp.cost_matrix, A.T], [A, np.zeros((len(keep), len(keep)))]])
    sol = np.linalg.solve(K, np.concatenate([-qp.cost_linear, b]))
    x, lam = sol[:n], -sol[n:]
    # lower-bound multipliers non-negative, upper-bound non-positive
    certified = np.all(lam[sg == 1] >= -1e-7) and np.all(lam[sg == -1] <= 1e-7)
    feasible = np.all(C @ x >= lo - 1e-8) and np.all(C @ x <= hi + 1e-8)
    return x, bool(certified and feasible)


def _const(v):
    return lambda t: v


def _lateral_instances():
    """Six instances whose end state is reached by some admissible torque
    sequence, so each QP is feasible by construction."""
    rng = np.random.default_rng(5)
    p = RomParams(z0=0.9)
    mg = p.m * p.g
    half = _const(0.5 * mg)
    setups = [
        ([(DSP, 0.4, 8), (SSP, 0.4, 8)], half, half, "exact"),
        ([(DSP, 0.3, 6), (SSP, 0.4, 10)], lambda t: mg * max(0.0, 1 - t / 0.3),
         lambda t: mg * min(1.0, 0.5 + t / 0.6), "exact"),
        ([(SSP, 0.3, 10)], _const(0.0), _const(mg), "euler"),
        ([(DSP, 0.2, 5), (SSP, 0.3, 6), (DSP, 0.1, 3)], half, half, "exact"),
        ([(DSP, 0.2, 8)], _const(0.3 * mg), _const(0.7 * mg), "exact"),
        ([(DSP, 0.25, 7), (SSP, 0.35, 7)], half, half, "euler"),
    ]
    for segs, FL, FR, method in setups:
        Y0 = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.1, 0.1)])
        _, t, _, fl, fr, As, Bs = transition_qp(Y0, Y0, segs, FL, FR, p, method)
        Y = Y0.copy()
        for k in range(t.size - 1):
            u = rng.uniform(-0.9, 0.9) * p.W1 * fl[k] + rng.uniform(-0.9, 0.9) * p.W1 * fr[k]
            Y = As[k] @ Y + Bs[k] * u
        yield Y0, Y, segs, FL, FR, p, method


def test_criterion_5_lateral_qp():
    worst, certified = 0.0, True
    for Y0, Yf, segs, FL, FR, p, method in _lateral_instances():
        plan = plan_transition_hlip(Y0, Yf, segs, FL, FR, p, method)
        qp = transition_qp(Y0, Yf, segs, FL, FR, p, method)[0]
        x = np.concatenate([plan.u_L, plan.u_R, plan.Y.ravel()])
        x_ref, ok = _kkt_oracle(qp, x)
        certified &= ok and plan.report.ok
        worst = max(worst, float(np.abs(x - x_ref).max()))
    p = RomParams(z0=0.9)
    half = 0.5 * p.m * p.g
    triv = plan_transition_hlip([0, 0], [0, 0], [(DSP, 0.2, 5), (SSP, 0.4, 8)], _const(half), _const(half), p)
    zero = bool(np.all(triv.u_L == 0.0) and np.all(triv.u_R == 0.0))
    ok = worst <= 1e-8 and certified and zero
    assert record(5, ok, f"6 instances, max deviation from KKT oracle {worst:.1e}, trivial u == 0: {zero}")


# -- 6: solver battery ------------------------------------------------------------

def _enumeration_oracle(G, c, A, lo, hi):
    """Minimum over every candidate active set of the equality-constrained QP."""
    n = c.size
    rows = [(A[i], lo[i]) for i in range(A.shape[0])] + [(A[i], hi[i]) for i in range(A.shape[0])]
    best, best_f = None, np.inf
    for k in range(n + 1):
        for S in itertools.combinations(range(len(rows)), k):
            if k:
                E = np.array([rows[i][0] for i in S])
                e = np.array([rows[i][1] for i in S])
                if np.linalg.matrix_rank(E) < k:
                    continue
                K = np.block([[G, E.T], [E, np.zeros((k, k))]])
                x = np.linalg.solve(K, np.concatenate([-c, e]))[:n]
            else:
                x = np.linalg.solve(G, -c)
            v = A @ x
            if np.all(v >= lo - 1e-9) and np.all(v <= hi + 1e-9):
                f = 0.5 * x @ G @ x + c @ x
                if f < best_f:
                    best, best_f = x, f
    return best


def test_criterion_6_solver_battery():
    rng = np.random.default_rng(6)
    worst = 0.0
    solved = 0
    for _ in range(100):
        n, m = rng.integers(2, 5), rng.integers(1, 5)
        R = rng.normal(size=(n, n))
        G = R @ R.T + 0.5 * np.eye(n)
        c = rng.normal(size=n) * 3
        A = rng.normal(size=(m, n))
        x_feas = rng.normal(size=n) * 0.3
        v = A @ x_feas
        lo = v - rng.uniform(0.05, 1.0, m)
        hi = v + rng.uniform(0.05, 1.0, m)
        rep = solve_qp(QpProblem(G, c, ineq_constraints=(A, lo, hi)))
        ref = _enumeration_oracle(G, c, A, lo, hi)
        solved += rep.ok
        worst = max(worst, float(np.abs(rep.solution - ref).max()))
    rosen = NlpProblem(2, lambda z: (1 - z[0]) ** 2 + 100 * (z[1] - z[0] ** 2) ** 2,
                       lambda z: np.zeros(0), -np.inf, np.inf, np.zeros(0), np.zeros(0))
    r1 = solve_nlp(rosen, np.array([-1.2, 1.0]))
    circ = NlpProblem(2, lambda z: z[0] + z[1], lambda z: np.array([z @ z]), -np.inf, np.inf, [-np.inf], [1.0])
    r2 = solve_nlp(circ, np.array([0.5, -0.2]))
    e1 = float(np.abs(r1.solution - 1.0).max())
    e2 = float(np.abs(r2.solution + np.sqrt(0.5)).max())
    ok = solved == 100 and worst <= 1e-8 and e1 <= 1e-5 and e2 <= 1e-5
    assert record(6, ok, f"QP {solved}/100 max dev {worst:.1e}; Rosenbrock {e1:.1e}; circle LP {e2:.1e}")


# -- 7, 8: biped model ------------------------------------------------------------

def _random_states(rng, model, count):
    out = []
    while len(out) < count:
        com_z = rng.uniform(0.76, 0.86)
        step = rng.uniform(-0.2, 0.2)
        try:
            q = standing_posture(model, (0.0, com_z), {"L": (-step / 2, 0.0), "R": (step / 2, 0.0)})
        except ValueError:
            continue
        q = q + rng.normal(scale=0.02, size=q.size)
        out.append((q, rng.normal(scale=1.0, size=q.size)))
    return out


def test_criterion_7_plastic_impact():
    model = BipedModel()
    rng = np.random.default_rng(7)
    worst_J, worst_dE = 0.0, -np.inf
    for q, qd in _random_states(rng, model, 50):
        qd_plus, _ = impact_map(model, q, qd, "LR")
        J, _ = contact_jacobian(model, q, None, "LR")
        worst_J = max(worst_J, float(np.abs(J @ qd_plus).max()))
        worst_dE = max(worst_dE, kinetic_energy(model, q, qd_plus) - kinetic_energy(model, q, qd))
    q0 = _random_states(rng, model, 1)[0][0]
    still = float(np.abs(impact_map(model, q0, np.zeros(q0.size), "LR")[0]).max())
    ok = worst_J <= 1e-10 and worst_dE <= 1e-10 and still == 0.0
    assert record(7, ok, f"max |J qd+| {worst_J:.1e}, max KE change {worst_dE:.1e}, rest maps to {still}")


def test_criterion_8_contact_force_affine():
    model = BipedModel()
    rng = np.random.default_rng(8)
    worst = 0.0
    for i, (q, qd) in enumerate(_random_states(rng, model, 50)):
        contacts = ("L", "R") if i % 3 else (("L",) if i % 2 else ("R",))
        A_v, b_v = contact_force_affine(model, q, qd, contacts)
        u = rng.normal(scale=50.0, size=A_v.shape[1])
        _, F = constrained_accel(model, q, qd, u, contacts)
        worst = max(worst, float(np.abs(A_v @ u + b_v - F).max() / max(1.0, np.abs(F).max())))
    assert record(8, worst <= 1e-9, f"max relative mismatch {worst:.1e} on 50 states")


# -- 9, 10: closed loop and determinism ---------------------------------------------

def test_criterion_9_closed_loop(pipeline_runs):
    out, man, elapsed = pipeline_runs[0]
    sim = man.stages.get("simulate", {})
    data = np.genfromtxt(out / "closed_loop.csv", delimiter=",", names=True, dtype=None, encoding=None)
    err = np.hypot(data["com_x"] - data["com_x_ref"], data["com_z"] - data["com_z_ref"])
    slack = data["V_dot"] - (-_gamma() * data["V"] + data["delta"])
    penalty = 1e6
    frac = float(np.mean(data["delta"] > 1e-3 * penalty * data["V"]))
    band = 0.0
    for s in ("L", "R"):
        F, lo, hi = data[f"Fz_{s}"], data[f"band_lo_{s}"], data[f"band_hi_{s}"]
        on = np.isfinite(lo) & np.isfinite(F)
        band = max(band, float(np.max(np.maximum(lo[on] - F[on], F[on] - hi[on]) / np.maximum(1.0, F[on]))))
        # the band is c = 0.1 about the planned force
        ref = data[f"Fref_{s}"][on]
        assert np.allclose(lo[on], 0.9 * ref, atol=1e-6) and np.allclose(hi[on], 1.1 * ref, atol=1e-6)
    periodic = sum(1 for e in sim.get("events", []) if e.startswith("liftoff")) - 1
    ok = (sim.get("status") == "ok" and err.max() <= 0.02 and slack.max() <= 1e-6 * max(1.0, data["V"].max())
          and frac < 0.1 and band <= 1e-6 and periodic >= 3 and elapsed <= 300)
    assert record(9, ok, f"max COM error {100 * err.max():.2f} cm, CLF slack {slack.max():.1e}, "
                         f"delta share {100 * frac:.2f} %, band excess {band:.1e}, "
                         f"{periodic} periodic liftoffs, {elapsed:.0f} s")


def _gamma():
    from romwalk.clfqp import ClfParams
    return ClfParams.from_gains(3, 100.0, 20.0).gamma


def test_criterion_10_determinism(pipeline_runs):
    (a, ma, _), (b, mb, _) = pipeline_runs
    csvs = sorted(f for f in ma.files if f.endswith(".csv"))
    same = [f for f in csvs if (a / f).read_bytes() == (b / f).read_bytes()]
    strip = lambda m: {k: v for k, v in m.deterministic_view().items()}  # noqa: E731
    ok = len(csvs) > 0 and same == csvs and strip(ma) == strip(mb) and ma.files == mb.files
    assert record(10, ok, f"{len(same)}/{len(csvs)} CSV files byte-identical, manifests equal modulo timings")
