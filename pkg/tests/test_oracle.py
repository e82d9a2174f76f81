import itertools

import numpy as np
import pytest

from conftest import deterministic
from twatsp_benders.model import FirstStageSolution, generate_instance, sample_scenarios
from twatsp_benders.oracle import TooLarge, expected_cost, recourse_of, solve_exact, solve_route, tour_count
from twatsp_benders.second_stage import solve_sp


def test_single_customer_cost():
    instance = generate_instance("nw", 1, seed=4)
    scenarios = sample_scenarios(instance, 1, eta=0.0)

    cost, fs = solve_exact(instance, scenarios)

    expected = 2 * instance.d[0, 1] + instance.sigma * instance.service[1]
    assert cost == pytest.approx(expected, abs=1e-6)
    assert fs.route == (1,)


def test_tour_count():
    assert tour_count(4) == 24
    assert tour_count(1) == 1


def test_refuses_large_instances():
    instance = generate_instance("nw", 9, seed=0)
    with pytest.raises(TooLarge):
        solve_exact(instance, deterministic(instance))


def test_zero_weights_reduce_to_shortest_tour():
    instance = generate_instance("nw", 5, seed=2, sigma=0.0, phi=0.0, psi=0.0)
    scenarios = sample_scenarios(instance, 3, seed=2)

    cost, _ = solve_exact(instance, scenarios)

    shortest = min(
        FirstStageSolution(route, np.zeros(5), np.zeros(5)).distance(instance)
        for route in itertools.permutations(range(1, 6))
    )
    assert cost == pytest.approx(shortest, abs=1e-6)


def test_joint_windows_agree_with_subproblems(small_instance, small_scenarios):
    total, fs = solve_route(small_instance, small_scenarios, (3, 2, 1))
    x, y = fs.x_vector(small_instance), fs.y_vector()

    recourse = sum(
        p * solve_sp(small_instance, small_scenarios, w, x, y).objective
        for w, p in enumerate(small_scenarios.probs)
    )
    assert total == pytest.approx(fs.distance(small_instance) + fs.width_cost(small_instance) + recourse, abs=1e-6)
    assert expected_cost(fs, small_instance, small_scenarios) == pytest.approx(total, abs=1e-6)
    assert recourse_of(fs, small_instance, small_scenarios) == pytest.approx(recourse, abs=1e-6)


def test_parallel_enumeration_matches_serial(small_instance, small_scenarios):
    serial = solve_exact(small_instance, small_scenarios, workers=1)
    parallel = solve_exact(small_instance, small_scenarios, workers=3)
    assert serial[0] == parallel[0]
    assert serial[1].route == parallel[1].route
