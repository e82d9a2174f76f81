import numpy as np
import pytest

from twatsp_benders.lp_core import (
    INF,
    LpBuilder,
    LpStatus,
    Sense,
    dual_objective,
    solve_lp,
    solve_lp_with_fixings,
    verify_farkas,
)


def _toy_lp():
    """min y + z over x in [0, 10], y in [2, 8] and the five toy rows."""
    lp = LpBuilder()
    x = lp.add_var(0.0, 10.0)
    y = lp.add_var(2.0, 8.0, cost=1.0)
    z = lp.add_var(cost=1.0)
    rows = [(-2, -3, 5, 17), (0, 3, 2, 10), (2, 0, -1, -10), (-5, 10, 2, 11), (1, 1, 2, 15)]
    for a, b, c, h in rows:
        lp.add_row({x: a, y: b, z: c}, Sense.GE, h)
    return lp.build(), x, y, z


def test_two_row_optimum_and_duals():
    """Test the optimum and row multipliers of a two-row maximization.

    Problem:
        minimize    -x - y
        subject to:
            x + 2y <= 4
            3x + y <= 6

    Expected:
        x = 1.6, y = 1.2, objective -2.8 and duals (d objective / d rhs) of -0.4 and -0.2
    """
    lp = LpBuilder()
    x = lp.add_var(cost=-1.0)
    y = lp.add_var(cost=-1.0)
    r1 = lp.add_row({x: 1.0, y: 2.0}, Sense.LE, 4.0, tracked=True)
    r2 = lp.add_row({x: 3.0, y: 1.0}, Sense.LE, 6.0, tracked=True)

    outcome = solve_lp(lp.build())

    assert outcome.status == LpStatus.OPTIMAL
    np.testing.assert_allclose(outcome.primal, [1.6, 1.2], atol=1e-9)
    assert outcome.objective_value == pytest.approx(-2.8, abs=1e-9)
    assert outcome.duals[r1] == pytest.approx(-0.4, abs=1e-9)
    assert outcome.duals[r2] == pytest.approx(-0.2, abs=1e-9)


def test_single_bound_row():
    lp = LpBuilder()
    x = lp.add_var(cost=1.0)
    lp.add_row({x: 1.0}, Sense.GE, 0.0)

    outcome = solve_lp(lp.build())

    assert outcome.is_optimal
    assert outcome.primal[x] == pytest.approx(0.0, abs=1e-12)
    assert outcome.objective_value == pytest.approx(0.0, abs=1e-12)


def test_contradictory_rows_give_farkas_certificate():
    """Test that x >= 1 and x <= 0 over a free x is declared infeasible with multipliers (1, 1)."""
    lp = LpBuilder()
    x = lp.add_var(lo=-INF)
    lp.add_row({x: 1.0}, Sense.GE, 1.0)
    lp.add_row({x: 1.0}, Sense.LE, 0.0)
    problem = lp.build()

    outcome = solve_lp(problem)

    assert outcome.status == LpStatus.INFEASIBLE
    assert outcome.primal is None
    np.testing.assert_allclose(outcome.farkas, [1.0, 1.0], atol=1e-9)
    assert verify_farkas(problem, outcome.farkas)


def test_unbounded_direction():
    lp = LpBuilder()
    x = lp.add_var(cost=-1.0)
    y = lp.add_var(cost=0.0)
    lp.add_row({x: 1.0, y: -1.0}, Sense.LE, 1.0)

    outcome = solve_lp(lp.build())

    assert outcome.status == LpStatus.UNBOUNDED
    assert outcome.ray[x] > 0
    assert outcome.ray[x] - outcome.ray[y] <= 1e-9


def test_toy_with_x_fixed_at_two():
    problem, x, y, z = _toy_lp()

    outcome = solve_lp_with_fixings(problem, {x: 2.0})

    assert outcome.is_optimal
    assert outcome.primal[y] == pytest.approx(2.0, abs=1e-9)
    assert outcome.primal[z] == pytest.approx(5.5, abs=1e-9)
    assert outcome.objective_value == pytest.approx(7.5, abs=1e-9)


def test_fixing_dual_matches_finite_difference():
    """Around x = 2 only the fifth toy row binds, so the value falls by 0.5 per unit of x."""
    problem, x, _, _ = _toy_lp()
    h = 1e-4

    base = solve_lp_with_fixings(problem, {x: 2.0})
    shifted = solve_lp_with_fixings(problem, {x: 2.0 + h})

    slope = (shifted.objective_value - base.objective_value) / h
    assert base.fixing_duals[x] == pytest.approx(-0.5, abs=1e-7)
    assert slope == pytest.approx(base.fixing_duals[x], abs=1e-6)


def test_fixing_outside_bounds_is_rejected():
    problem, x, _, _ = _toy_lp()
    with pytest.raises(ValueError, match="outside its bounds"):
        solve_lp_with_fixings(problem, {x: 11.0})


def test_inverted_bounds_are_rejected():
    lp = LpBuilder()
    lp.add_var(lo=2.0, hi=1.0)
    with pytest.raises(ValueError, match="exceeds upper bound"):
        lp.build()


def _random_lp(seed, shift=None):
    """Boxed minimization with GE rows that a random interior point satisfies with slack."""
    rng = np.random.default_rng(seed)
    n, m = 6, 4
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.0, 10.0, size=n)
    b = A @ x0 - rng.uniform(0.1, 1.0, size=m)
    if shift is not None:
        b[shift[0]] += shift[1]
    lp = LpBuilder()
    xs = [lp.add_var(0.0, 10.0, cost=c) for c in rng.normal(size=n)]
    rows = [lp.add_row({xs[j]: A[i, j] for j in range(n)}, Sense.GE, b[i], tracked=True) for i in range(m)]
    return lp, xs, rows, rng


@pytest.mark.parametrize("seed", range(200))
def test_strong_duality_on_random_boxed_lps(seed):
    problem = _random_lp(seed)[0].build()

    outcome = solve_lp(problem)

    assert outcome.is_optimal
    tol = 1e-7 * (1.0 + abs(outcome.objective_value))
    assert abs(dual_objective(problem, outcome.duals) - outcome.objective_value) <= tol
    for i, row in enumerate(problem.rows):
        activity = sum(a * outcome.primal[j] for j, a in row.coeffs.items())
        assert activity >= row.rhs - 1e-7
        assert outcome.duals[i] >= -1e-9
        assert abs(outcome.duals[i] * (activity - row.rhs)) <= tol


@pytest.mark.parametrize("seed", range(50))
def test_random_infeasible_lps_carry_checked_certificates(seed):
    """Even seeds add a row the box cannot meet; odd seeds add a pair of contradictory rows."""
    lp, xs, _, rng = _random_lp(seed)
    a = rng.normal(size=len(xs))
    if seed % 2 == 0:
        reach = float(np.maximum(a, 0.0).sum() * 10.0)
        lp.add_row({x: float(c) for x, c in zip(xs, a)}, Sense.GE, reach + 1.0)
    else:
        level = float(rng.uniform(-5.0, 5.0))
        lp.add_row({x: float(c) for x, c in zip(xs, a)}, Sense.GE, level)
        lp.add_row({x: float(c) for x, c in zip(xs, a)}, Sense.LE, level - 1.0)
    problem = lp.build()

    outcome = solve_lp(problem)

    assert outcome.status == LpStatus.INFEASIBLE
    assert len(outcome.farkas) == len(problem.rows)
    assert verify_farkas(problem, outcome.farkas)


@pytest.mark.parametrize("seed", range(20))
def test_row_duals_match_finite_differences(seed):
    """Each row dual lies between the one-sided slopes of the optimal value in that row's rhs."""
    h = 1e-5
    problem = _random_lp(seed)[0].build()
    base = solve_lp(problem)
    assert base.is_optimal

    for i in range(len(problem.rows)):
        up = solve_lp(_random_lp(seed, (i, h))[0].build()).objective_value
        down = solve_lp(_random_lp(seed, (i, -h))[0].build()).objective_value
        right = (up - base.objective_value) / h
        left = (base.objective_value - down) / h
        tol = 1e-3 * (1.0 + abs(base.duals[i]))
        assert left - tol <= base.duals[i] <= right + tol


def test_repeated_solves_are_identical():
    problem, x, _, _ = _toy_lp()
    first = solve_lp_with_fixings(problem, {x: 7.0})
    second = solve_lp_with_fixings(problem, {x: 7.0})
    assert np.array_equal(first.primal, second.primal)
    assert first.fixing_duals == second.fixing_duals
