import numpy as np
import pytest

from stctraj.conic import (
    ConicProgram,
    ProgramBuilder,
    SolveStatus,
    add_abs_penalty,
    add_quadratic_epigraph,
    dump_program,
    load_program,
    solve,
)

TOL = 1e-8


def _min_norm_program():
    # minimize t subject to t >= ||(3, 4)||
    b = ProgramBuilder()
    t = b.add_vars(1)
    x = b.add_vars(2)
    b.add_cost(t, 1.0)
    b.pin(x, 3.0)
    b.pin(x + 1, 4.0)
    b.add_cone(t, [x, x + 1])
    return b.build()


def test_solve_euclidean_norm():
    res = solve(_min_norm_program(), TOL)
    assert res.status is SolveStatus.OPTIMAL
    assert res.primal[0] == pytest.approx(5.0, abs=10 * TOL)
    assert res.objective_value == pytest.approx(5.0, abs=10 * TOL)


def test_solve_single_equality():
    b = ProgramBuilder()
    x = b.add_vars(1)
    b.add_cost(x, 1.0)
    b.pin(x, 2.0)
    res = solve(b.build(), TOL)
    assert res.status is SolveStatus.OPTIMAL
    assert res.objective_value == pytest.approx(2.0, abs=10 * TOL)


def test_solve_unbounded():
    b = ProgramBuilder()
    x = b.add_vars(1)
    b.add_cost(x, -1.0)
    res = solve(b.build(), TOL)
    assert res.status is SolveStatus.UNBOUNDED
    assert res.primal is None
    assert res.objective_value is None


def test_solve_infeasible():
    b = ProgramBuilder()
    x = b.add_vars(1)
    b.pin(x, 1.0)
    b.pin(x, 2.0)
    res = solve(b.build(), TOL)
    assert res.status is SolveStatus.INFEASIBLE


def test_malformed_program_rejected():
    with pytest.raises(ValueError):
        ConicProgram(
            num_vars=1,
            objective=np.zeros(1),
            eq_rows=np.array([0]),
            eq_cols=np.array([3]),  # out of range
            eq_vals=np.array([1.0]),
            eq_rhs=np.array([0.0]),
        )
    with pytest.raises(ValueError):
        ConicProgram(
            num_vars=2,
            objective=np.zeros(2),
            eq_rows=np.zeros(0, dtype=int),
            eq_cols=np.zeros(0, dtype=int),
            eq_vals=np.zeros(0),
            eq_rhs=np.zeros(0),
            cones=((0, ()),),  # empty x part
        )


def _epigraph_value(W, dz):
    """Minimized epigraph value for fixed dz (pinned by equalities)."""
    b = ProgramBuilder()
    n = len(dz)
    v = b.add_vars(n)
    s = b.add_vars(1)
    b.add_cost(s, 1.0)
    for i, val in enumerate(dz):
        b.pin(v + i, val)
    p = add_quadratic_epigraph(b.build(), W, range(v, v + n), s)
    res = solve(p, TOL)
    assert res.status is SolveStatus.OPTIMAL
    return res.primal[s]


def test_epigraph_identity():
    assert _epigraph_value(np.eye(2), [1.0, 1.0]) == pytest.approx(2.0, abs=1e-6)


def test_epigraph_zero_weight():
    assert _epigraph_value(np.zeros((2, 2)), [7.0, -3.0]) == pytest.approx(0.0, abs=1e-6)


def test_epigraph_scenario1_trust_weight():
    # 0.1 * blkdiag(I3, 0_6) acting on e1 of a 9-vector
    W = np.diag([0.1, 0.1, 0.1, 0, 0, 0, 0, 0, 0])
    dz = np.zeros(9)
    dz[0] = 1.0
    assert _epigraph_value(W, dz) == pytest.approx(0.1, abs=1e-6)


def test_epigraph_offset():
    # s >= (v - v0)^T (v - v0) with v pinned elsewhere
    b = ProgramBuilder()
    v = b.add_vars(2)
    s = b.add_vars(1)
    b.add_cost(s, 1.0)
    b.pin(v, 3.0)
    b.pin(v + 1, 1.0)
    p = add_quadratic_epigraph(b.build(), np.eye(2), [v, v + 1], s, offset=np.array([1.0, 1.0]))
    res = solve(p, TOL)
    assert res.primal[s] == pytest.approx(4.0, abs=1e-6)


def test_epigraph_rejects_non_psd():
    with pytest.raises(ValueError):
        add_quadratic_epigraph(
            ProgramBuilder(2).build(), np.diag([1.0, -1.0]), [0, 1], 0
        )


def _penalty_value(weights, nu_vals):
    b = ProgramBuilder()
    n = len(nu_vals)
    v = b.add_vars(n)
    for i, val in enumerate(nu_vals):
        b.pin(v + i, val)
    p = add_abs_penalty(b.build(), weights, range(v, v + n))
    res = solve(p, TOL)
    assert res.status is SolveStatus.OPTIMAL
    return res.objective_value


def test_abs_penalty_examples():
    assert _penalty_value(1.0, [-3.0]) == pytest.approx(3.0, abs=1e-6)
    assert _penalty_value(1e5, [0.0]) == pytest.approx(0.0, abs=1e-3)
    assert _penalty_value([1.0, 2.0], [1.0, -1.0]) == pytest.approx(3.0, abs=1e-6)


def test_abs_penalty_rejects_negative_weight():
    with pytest.raises(ValueError):
        add_abs_penalty(ProgramBuilder(1).build(), -1.0, [0])


def _random_program(rng):
    b = ProgramBuilder()
    n = rng.integers(3, 10)
    v = b.add_vars(int(n))
    for i in range(n):
        if rng.random() < 0.5:
            b.add_cost(v + i, float(rng.normal()))
    for _ in range(rng.integers(1, 5)):
        cols = rng.choice(n, size=rng.integers(1, n), replace=False)
        b.add_eq(cols, rng.normal(size=len(cols)), float(rng.normal()))
    if n >= 3:
        b.add_cone(0, list(range(1, int(n))))
    b.add_nonneg([int(rng.integers(0, n))])
    return b.build()


def test_dump_load_round_trip_bit_exact():
    rng = np.random.default_rng(0)
    for _ in range(25):
        p = _random_program(rng)
        q = load_program(dump_program(p))
        assert q.num_vars == p.num_vars
        assert np.array_equal(q.objective, p.objective)
        assert np.array_equal(q.eq_rows, p.eq_rows)
        assert np.array_equal(q.eq_cols, p.eq_cols)
        assert np.array_equal(q.eq_vals, p.eq_vals)
        assert np.array_equal(q.eq_rhs, p.eq_rhs)
        assert q.cones == p.cones
        assert q.nonneg == p.nonneg
        assert dump_program(q) == dump_program(p)


def test_optimal_residuals_within_ten_tol():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 10:
        b = ProgramBuilder()
        n = 6
        v = b.add_vars(n)
        b.add_nonneg(range(v, v + n))
        for i in range(n):
            b.add_cost(v + i, float(rng.uniform(0.5, 2.0)))
        for _ in range(3):
            cols = rng.choice(n, size=3, replace=False)
            b.add_eq(cols, rng.uniform(0.5, 2.0, size=3), float(rng.uniform(1.0, 4.0)))
        t = b.add_vars(1)
        b.add_cost(t, 1.0)
        b.add_cone(t, [v, v + 1])
        res = solve(b.build(), TOL)
        if res.status is not SolveStatus.OPTIMAL:
            continue
        eq, cone, nn = b.build().residuals(res.primal)
        assert eq <= 10 * TOL
        assert cone <= 10 * TOL
        assert nn <= 10 * TOL
        checked += 1


def test_epigraph_tightness_under_positive_cost():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = 4
        W = rng.normal(size=(n, n))
        W = W.T @ W
        dz = rng.normal(size=n)
        b = ProgramBuilder()
        v = b.add_vars(n)
        s = b.add_vars(1)
        b.add_cost(s, 1.0)
        for i, val in enumerate(dz):
            b.pin(v + i, float(val))
        p = add_quadratic_epigraph(b.build(), W, range(v, v + n), s)
        res = solve(p, TOL)
        assert res.status is SolveStatus.OPTIMAL
        assert res.primal[s] == pytest.approx(float(dz @ W @ dz), rel=1e-6, abs=1e-6)
