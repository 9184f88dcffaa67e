import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from romwalk.solver import (
    INFEASIBLE,
    OPTIMAL,
    ColoredJacobian,
    NlpProblem,
    QpProblem,
    SqpOptions,
    color_columns,
    detect_pattern,
    dump_problem,
    kkt_residual,
    qp_as_nlp,
    solve_nlp,
    solve_qp,
)


def test_unconstrained_qp_is_a_linear_solve():
    G = np.array([[4.0, 1.0], [1.0, 3.0]])
    c = np.array([1.0, -2.0])
    rep = solve_qp(QpProblem(G, c))
    assert rep.status == OPTIMAL
    np.testing.assert_allclose(rep.solution, np.linalg.solve(G, -c), atol=1e-12)


def test_bounds_and_equalities():
    # min |x|^2 s.t. x0 + x1 = 1, x1 <= 0.2
    rep = solve_qp(QpProblem(np.eye(2) * 2, np.zeros(2), eq_constraints=([[1.0, 1.0]], [1.0]),
                             variable_bounds=([-np.inf, -np.inf], [np.inf, 0.2])))
    assert rep.ok
    np.testing.assert_allclose(rep.solution, [0.8, 0.2], atol=1e-12)
    assert kkt_residual(QpProblem(np.eye(2) * 2, np.zeros(2), eq_constraints=([[1.0, 1.0]], [1.0]),
                                  variable_bounds=([-np.inf, -np.inf], [np.inf, 0.2])),
                        rep.solution, rep.multipliers) < 1e-9


def test_infeasible_constraints_are_reported():
    qp = QpProblem(np.eye(2), np.zeros(2), ineq_constraints=([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0], [2.0, 2.0]))
    rep = solve_qp(qp)
    assert rep.status == INFEASIBLE


def test_invalid_problem_data():
    with pytest.raises(ValueError):
        QpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), np.zeros(2), variable_bounds=([1.0, 0.0], [0.0, 0.0]))
    with pytest.raises(ValueError):
        QpProblem(np.eye(3), np.zeros(2))


def test_warm_start_reuses_the_active_set():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 4))
    qp = QpProblem(np.eye(4), rng.normal(size=4) * 5, ineq_constraints=(A, -np.ones(6), np.ones(6)))
    cold = solve_qp(qp)
    warm = solve_qp(qp, warm_start=cold.active_set)
    np.testing.assert_allclose(warm.solution, cold.solution, atol=1e-10)
    assert warm.iterations <= cold.iterations


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 6), st.integers(0, 2 ** 31 - 1))
def test_random_qp_satisfies_kkt(n, m, seed):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(n, n))
    G = R @ R.T + 0.1 * np.eye(n)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    lo, hi = A @ x0 - rng.uniform(0.0, 1.0, m), A @ x0 + rng.uniform(0.0, 1.0, m)
    qp = QpProblem(G, rng.normal(size=n) * 3, ineq_constraints=(A, lo, hi) if m else None,
                   variable_bounds=(x0 - 2, x0 + 2))
    rep = solve_qp(qp)
    assert rep.ok
    assert kkt_residual(qp, rep.solution, rep.multipliers) < 1e-7
    if m:
        v = A @ rep.solution
        assert np.all(v >= lo - 1e-8) and np.all(v <= hi + 1e-8)


def test_sqp_equality_constrained():
    # min x + y on the unit circle
    prob = NlpProblem(2, lambda z: z[0] + z[1], lambda z: np.array([z @ z]), -np.inf, np.inf, [1.0], [1.0])
    rep = solve_nlp(prob, np.array([1.0, 0.2]))
    assert rep.ok
    np.testing.assert_allclose(rep.solution, [-np.sqrt(0.5)] * 2, atol=1e-6)


def test_sqp_respects_variable_bounds():
    prob = NlpProblem(1, lambda z: (z[0] - 3) ** 2, lambda z: np.zeros(0), [-1.0], [1.0], np.zeros(0), np.zeros(0))
    rep = solve_nlp(prob, np.array([0.0]))
    assert rep.ok and abs(rep.solution[0] - 1.0) < 1e-8


def test_sqp_initial_hessian_option():
    rosen = NlpProblem(2, lambda z: (1 - z[0]) ** 2 + 100 * (z[1] - z[0] ** 2) ** 2,
                       lambda z: np.zeros(0), -np.inf, np.inf, np.zeros(0), np.zeros(0))
    rep = solve_nlp(rosen, np.array([-1.2, 1.0]), SqpOptions(initial_hessian=np.array([10.0, 10.0])))
    assert rep.ok
    np.testing.assert_allclose(rep.solution, [1.0, 1.0], atol=1e-5)


def test_qp_as_nlp_agrees_with_qp():
    qp = QpProblem(np.diag([2.0, 4.0]), np.array([-2.0, -4.0]), ineq_constraints=([[1.0, 1.0]], [-np.inf], [1.0]))
    a = solve_qp(qp).solution
    b = solve_nlp(qp_as_nlp(qp), np.zeros(2)).solution
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_colored_jacobian_matches_dense_differences():
    def f(z):
        return np.array([z[i] ** 2 - z[i + 1] * np.sin(z[i]) for i in range(z.size - 1)])

    z = np.linspace(0.1, 1.0, 12)
    pat = detect_pattern(f, z)
    colors = color_columns(pat)
    for c in np.unique(colors):
        cols = np.flatnonzero(colors == c)
        assert not np.any(pat[:, cols].sum(axis=1) > 1)
    Jc = ColoredJacobian(f, pat)
    assert Jc.n_colors <= 3
    dense = np.column_stack([(f(z + 1e-6 * e) - f(z - 1e-6 * e)) / 2e-6 for e in np.eye(z.size)])
    np.testing.assert_allclose(Jc(z), dense, atol=1e-8)


def test_dump_problem_writes_json(tmp_path):
    qp = QpProblem(np.eye(2), np.ones(2), variable_bounds=([-1, -1], [1, 1]))
    path = tmp_path / "qp.json"
    dump_problem(qp, path, x=np.zeros(2))
    doc = json.loads(path.read_text())
    assert doc["kind"] == "qp" and doc["x"] == [0.0, 0.0]
