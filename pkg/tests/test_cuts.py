import itertools

import numpy as np
import pytest

from twatsp_benders.cuts import (
    BIG_THETA,
    THETA,
    Cut,
    CutFamily,
    CutPool,
    InvalidCall,
    MasterPoint,
    feasibility_cut,
    generalized_cut,
    is_violated,
    standard_multicut,
    strengthened_multicut,
    subtour_cuts,
)
from twatsp_benders.generic import GenericProblem, GenericScenario, solve_feasibility_generic
from twatsp_benders.master_bnc import VariantConfig, solve
from twatsp_benders.model import FirstStageSolution, generate_instance, sample_scenarios
from twatsp_benders.second_stage import solve_ap, solve_feasibility, solve_sp


def _x_from_arcs(instance, arcs):
    x = np.zeros(instance.num_arcs)
    for a in arcs:
        x[instance.arc_index[a]] = 1.0
    return x


def _random_first_stage(instance, rng):
    route = tuple(int(i) for i in rng.permutation(np.arange(1, instance.n + 1)))
    ys = rng.uniform(0.0, 200.0, size=instance.n)
    ye = ys + instance.customer_service() + rng.uniform(0.0, 40.0, size=instance.n)
    return FirstStageSolution(route, ys, ye)


def test_standard_multicut_is_tight_and_valid(small_instance, small_scenarios):
    rng = np.random.default_rng(7)
    fs = _random_first_stage(small_instance, rng)
    x0, y0 = fs.x_vector(small_instance), fs.y_vector()
    sp = solve_sp(small_instance, small_scenarios, 1, x0, y0)
    cut = standard_multicut(sp, x0, y0, 1)

    assert cut.family == CutFamily.STANDARD_MULTI
    assert cut.aux == THETA and cut.scenario == 1
    assert cut.bound_at(x0, y0) == pytest.approx(sp.objective, abs=1e-6)
    for _ in range(20):
        other = _random_first_stage(small_instance, rng)
        x, y = other.x_vector(small_instance), other.y_vector()
        exact = solve_sp(small_instance, small_scenarios, 1, x, y).objective
        assert cut.bound_at(x, y) <= exact + 1e-6


def test_generalized_cut_never_overestimates(small_instance, small_scenarios):
    ids, probs = [0, 1, 2], list(small_scenarios.probs)
    x_bar = FirstStageSolution((1, 2, 3), np.zeros(3), np.full(3, 50.0)).x_vector(small_instance)
    ap = solve_ap(small_instance, small_scenarios, ids, probs, x_bar)
    cut = generalized_cut(ap, x_bar)

    assert cut.aux == BIG_THETA
    np.testing.assert_array_equal(cut.coeff_y, np.zeros(2 * small_instance.n))
    assert cut.bound_at(x_bar, np.zeros(6)) == pytest.approx(ap.objective, abs=1e-6)
    for route in itertools.permutations([1, 2, 3]):
        x = FirstStageSolution(route, np.zeros(3), np.full(3, 50.0)).x_vector(small_instance)
        value = solve_ap(small_instance, small_scenarios, ids, probs, x).objective
        assert cut.bound_at(x, np.zeros(6)) <= value + 1e-6


def test_strengthened_multicut_is_tight_at_ap_windows(small_instance, small_scenarios):
    x_bar = FirstStageSolution((3, 1, 2), np.zeros(3), np.full(3, 50.0)).x_vector(small_instance)
    ap = solve_ap(small_instance, small_scenarios, [0, 1, 2], list(small_scenarios.probs), x_bar)
    sp = solve_sp(small_instance, small_scenarios, 2, x_bar, ap.y_bar)
    cut = strengthened_multicut(sp, x_bar, ap.y_bar, 2)

    assert cut.family == CutFamily.STRENGTHENED_MULTI
    assert cut.bound_at(x_bar, ap.y_bar) == pytest.approx(sp.objective, abs=1e-6)


def test_feasibility_cut_refused_at_feasible_point(small_instance, small_scenarios):
    fs = FirstStageSolution((1, 2, 3), np.zeros(3), np.full(3, 50.0))
    feas = solve_feasibility(small_instance, small_scenarios, fs.x_vector(small_instance), fs.y_vector())
    with pytest.raises(InvalidCall):
        feasibility_cut(feas, fs.x_vector(small_instance), fs.y_vector())


@pytest.mark.parametrize("scale", [1.0, 2.0])
def test_feasibility_cut_separates_by_epsilon(scale):
    """Recourse row x + y >= 5 cannot hold on the unit box; at (1, 1) it misses by 3."""
    scenario = GenericScenario(p=1.0, f=[0.0], W=[[scale]], T=[[scale]], S=[[0.0]], h=[5.0 * scale])
    problem = GenericProblem(
        c=[0.0], d=[0.0], x_lower=[0.0], x_upper=[1.0], y_lower=[0.0], y_upper=[1.0], scenarios=(scenario,)
    )
    feas = solve_feasibility_generic(problem, [1.0], [1.0])
    cut = feasibility_cut(feas, [1.0], [1.0])
    point = MasterPoint(x=np.array([1.0]), y=np.array([1.0]))

    assert feas.epsilon_total == pytest.approx(3.0 * scale, abs=1e-9)
    assert cut.violation(point) == pytest.approx(feas.epsilon_total, abs=1e-9)
    assert cut.coeff_x[0] / cut.rhs == pytest.approx(1.0 / 5.0, abs=1e-9)
    assert is_violated(cut, point)


def test_single_tour_has_no_subtour_cut(small_instance):
    x = FirstStageSolution((2, 1, 3), np.zeros(3), np.zeros(3)).x_vector(small_instance)
    assert subtour_cuts(small_instance, x) == []


def test_one_cut_per_depot_free_component():
    instance = generate_instance("nw", 4, seed=0)
    x = _x_from_arcs(instance, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 3)])
    cuts = subtour_cuts(instance, x)

    assert len(cuts) == 1
    cut = cuts[0]
    leaving = {instance.arcs[k] for k in np.flatnonzero(cut.coeff_x)}
    assert leaving == {(i, j) for i in (3, 4) for j in (0, 1, 2)}
    assert cut.rhs == -1.0
    assert is_violated(cut, MasterPoint(x=x, y=np.zeros(8)))
    for route in itertools.permutations([1, 2, 3, 4]):
        tour = FirstStageSolution(route, np.zeros(4), np.zeros(4)).x_vector(instance)
        assert not is_violated(cut, MasterPoint(x=tour, y=np.zeros(8)))


def test_two_subtours_give_two_cuts():
    instance = generate_instance("nw", 6, seed=0)
    x = _x_from_arcs(instance, [(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 6), (6, 4)])
    cuts = subtour_cuts(instance, x)
    assert len(cuts) == 2
    assert all(c.family == CutFamily.SUBTOUR and c.aux is None for c in cuts)


def test_zero_cut_is_never_violated():
    cut = Cut(CutFamily.FEASIBILITY, np.zeros(3), np.zeros(2), 0.0)
    assert not is_violated(cut, MasterPoint(x=np.ones(3), y=np.ones(2)))


def test_multicut_requires_theta():
    with pytest.raises(ValueError, match="exactly one"):
        Cut(CutFamily.STANDARD_MULTI, np.zeros(2), np.zeros(2), 0.0)


def test_pool_suppresses_duplicates_and_logs(tmp_path):
    pool = CutPool()
    cut = Cut(CutFamily.STANDARD_MULTI, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 2.0, scenario=0, aux=THETA)
    twin = Cut(CutFamily.STANDARD_MULTI, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 2.0 + 1e-12, scenario=0, aux=THETA)
    other = Cut(CutFamily.STANDARD_MULTI, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 2.0, scenario=1, aux=THETA)

    assert pool.add(cut, node=0, violation=0.25)
    assert not pool.add(twin, node=3)
    assert pool.add(other, node=4)
    assert len(pool) == 2
    assert pool.counts()[CutFamily.STANDARD_MULTI.value] == 2

    lines = pool.write_log(tmp_path / "cuts.csv").read_text().splitlines()
    assert lines[0] == "family,scenario,node,violation"
    assert lines[1] == "StandardMulti,0,0,0.25"
    assert len(lines) == 3


@pytest.mark.parametrize("seed", range(5))
def test_strengthened_cut_dominates_standard_at_ap_windows(seed):
    """At (x̄, ȳ) the strengthened cut equals SP there, while the standard cut from (x̄, y*) only underestimates it."""
    instance = generate_instance("nw", 4, seed=seed)
    scenarios = sample_scenarios(instance, 4, seed=seed)
    rng = np.random.default_rng(seed)
    fs = _random_first_stage(instance, rng)
    x_bar, y_star = fs.x_vector(instance), fs.y_vector()
    ap = solve_ap(instance, scenarios, [0, 1, 2, 3], list(scenarios.probs), x_bar)

    for omega in range(4):
        standard = standard_multicut(solve_sp(instance, scenarios, omega, x_bar, y_star), x_bar, y_star, omega)
        strong = strengthened_multicut(solve_sp(instance, scenarios, omega, x_bar, ap.y_bar), x_bar, ap.y_bar, omega)
        assert strong.bound_at(x_bar, ap.y_bar) >= standard.bound_at(x_bar, ap.y_bar) - 1e-6


def _sample_points(instance, count, seed):
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(count):
        route = tuple(int(i) for i in rng.permutation(np.arange(1, instance.n + 1)))
        ys = rng.uniform(0.0, instance.T, size=instance.n)
        ye = ys + instance.customer_service() + rng.uniform(0.0, 40.0, size=instance.n)
        fs = FirstStageSolution(route, ys, ye)
        points.append((fs.x_vector(instance), fs.y_vector()))
    return points


@pytest.mark.parametrize("variant", ["bd", "tbd"])
def test_every_pooled_cut_is_valid_on_sampled_tours(four_customers, four_customer_scenarios, variant):
    instance, scenarios = four_customers, four_customer_scenarios
    report = solve(instance, scenarios, VariantConfig.for_variant(variant))
    cuts = report.pool.cuts()
    assert cuts

    ids, probs = list(range(len(scenarios))), list(scenarios.probs)
    ap_values = {}
    for x, y in _sample_points(instance, 50, seed=11):
        sp_values = [solve_sp(instance, scenarios, w, x, y).objective for w in ids]
        key = x.tobytes()
        if key not in ap_values:
            ap_values[key] = solve_ap(instance, scenarios, ids, probs, x).objective
        for cut in cuts:
            if cut.aux == THETA:
                assert cut.bound_at(x, y) <= sp_values[cut.scenario] + 1e-6
            elif cut.aux == BIG_THETA:
                assert cut.bound_at(x, y) <= ap_values[key] + 1e-6
            else:
                assert cut.violation(MasterPoint(x=x, y=y)) <= 1e-6
