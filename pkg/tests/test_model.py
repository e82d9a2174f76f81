import json

import numpy as np
import pytest

from conftest import deterministic
from twatsp_benders.model import (
    FirstStageSolution,
    Instance,
    ScenarioSet,
    cost_breakdown,
    evaluate,
    generate_instance,
    read_instance,
    read_scenarios,
    sample_scenarios,
    write_instance,
    write_scenarios,
)
from twatsp_benders.serialization import ParseError


def test_single_customer_exact_fit(single_customer):
    """Window [0, 2] with zero travel time: arrival at 0, no penalty, cost is the width only."""
    scenarios = ScenarioSet(np.zeros((1, 2, 2)), np.array([1.0]))
    fs = FirstStageSolution((1,), [0.0], [2.0])

    total, second = evaluate(single_customer, scenarios, fs)

    assert total == pytest.approx(10.0 + 2.0, abs=1e-9)  # distance 2 * 5, width sigma * 2
    assert second[0].cost == pytest.approx(0.0, abs=1e-9)
    assert second[0].w[1] == pytest.approx(2.0, abs=1e-9)


def test_early_window_costs_lateness(single_customer):
    scenarios = deterministic(single_customer)
    fs = FirstStageSolution((1,), [0.0], [2.0])

    total, second = evaluate(single_customer, scenarios, fs)

    # departure no earlier than 5 + 2, so lateness 5 at phi = 3
    assert second[0].l[0] == pytest.approx(5.0, abs=1e-9)
    assert second[0].cost == pytest.approx(15.0, abs=1e-9)
    assert total == pytest.approx(10.0 + 2.0 + 15.0, abs=1e-9)


def test_waiting_avoids_earliness(single_customer):
    scenarios = deterministic(single_customer)
    fs = FirstStageSolution((1,), [10.0], [12.0])

    _, second = evaluate(single_customer, scenarios, fs)

    assert second[0].cost == pytest.approx(0.0, abs=1e-9)


def test_widening_windows_never_raises_penalties(small_instance, small_scenarios):
    route = (1, 2, 3)
    ys = np.array([40.0, 80.0, 120.0])
    ye = ys + small_instance.customer_service()
    narrow = cost_breakdown(small_instance, small_scenarios, FirstStageSolution(route, ys, ye))
    wide = cost_breakdown(small_instance, small_scenarios, FirstStageSolution(route, ys - 5.0, ye + 5.0))

    assert wide.penalty + wide.overtime <= narrow.penalty + narrow.overtime + 1e-9
    assert wide.width == pytest.approx(narrow.width + 10.0 * 3 * small_instance.sigma)


def test_breakdown_adds_up(small_instance, small_scenarios):
    fs = FirstStageSolution((2, 1, 3), [30.0, 60.0, 90.0], [60.0, 90.0, 130.0])
    total, _ = evaluate(small_instance, small_scenarios, fs)
    assert cost_breakdown(small_instance, small_scenarios, fs).total == pytest.approx(total, abs=1e-9)


def test_narrow_window_is_rejected(small_instance, small_scenarios):
    fs = FirstStageSolution((1, 2, 3), [0.0, 0.0, 0.0], [1.0, 100.0, 100.0])
    with pytest.raises(ValueError, match="narrower than its service time"):
        evaluate(small_instance, small_scenarios, fs)


def test_vectors_round_trip(small_instance):
    fs = FirstStageSolution((3, 1, 2), [1.0, 2.0, 3.0], [20.0, 30.0, 40.0])
    back = FirstStageSolution.from_vectors(small_instance, fs.x_vector(small_instance), fs.y_vector())
    assert back.route == fs.route
    np.testing.assert_array_equal(back.ys, fs.ys)
    np.testing.assert_array_equal(back.ye, fs.ye)
    assert fs.x_vector(small_instance).sum() == small_instance.n + 1


@pytest.mark.parametrize("layout", ["rc", "nw"])
def test_generator_is_deterministic(layout):
    a = generate_instance(layout, 6, seed=11)
    b = generate_instance(layout, 6, seed=11)
    c = generate_instance(layout, 6, seed=12)
    assert a == b
    assert a != c
    np.testing.assert_array_equal(a.coords[0], [50.0, 50.0])
    assert sample_scenarios(a, 5, seed=4) == sample_scenarios(b, 5, seed=4)


def test_clustered_layout_service_times():
    instance = generate_instance("clustered_rc", 8, seed=2)
    np.testing.assert_array_equal(instance.customer_service(), np.full(8, 10.0))
    assert np.all((instance.coords >= 0.0) & (instance.coords <= 100.0))


def test_zero_disruption_gives_distances(small_instance):
    scenarios = sample_scenarios(small_instance, 3, eta=0.0, seed=5)
    for t in scenarios.times:
        np.testing.assert_allclose(t, small_instance.d, atol=1e-12)


def test_symmetric_disruptions(small_instance):
    scenarios = sample_scenarios(small_instance, 4, seed=9, symmetric=True)
    assert scenarios.is_symmetric()


def test_big_m_is_largest_total_travel_time(small_instance, small_scenarios):
    off = ~np.eye(small_instance.n + 1, dtype=bool)
    expected = max(t[off].sum() for t in small_scenarios.times)
    assert small_scenarios.big_M == pytest.approx(expected)


@pytest.mark.slow
def test_disruption_moments():
    """Mean disruption is eta * d and its coefficient of variation is cov."""
    instance = Instance(n=1, coords=np.array([[0.0, 0.0], [30.0, 40.0]]), service=np.array([0.0, 5.0]), T=200.0)
    scenarios = sample_scenarios(instance, 100_000, cov=0.25, eta=0.35, seed=0)
    delta = scenarios.times[:, 0, 1] - 50.0

    assert delta.mean() == pytest.approx(0.35 * 50.0, rel=0.02)
    assert delta.std() / delta.mean() == pytest.approx(0.25, rel=0.02)


def test_instance_round_trip(tmp_path, small_instance, small_scenarios):
    write_instance(small_instance, tmp_path / "inst.json")
    write_scenarios(small_scenarios, tmp_path / "scen.json")

    assert read_instance(tmp_path / "inst.json") == small_instance
    assert read_scenarios(tmp_path / "scen.json") == small_scenarios
    assert read_instance(tmp_path / "inst.json").name == small_instance.name


def test_missing_field_is_named(tmp_path, small_instance):
    path = write_instance(small_instance, tmp_path / "inst.json")
    data = json.loads(path.read_text())
    del data["T"]
    path.write_text(json.dumps(data))

    with pytest.raises(ParseError, match="'T'"):
        read_instance(path)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n": 2,\n  "coords": [\n')
    with pytest.raises(ParseError, match="line"):
        read_instance(path)


def test_scenario_matrix_must_be_square(tmp_path):
    path = tmp_path / "scen.json"
    path.write_text(json.dumps({"probs": [1.0], "scenarios": [[0.0, 1.0, 2.0]]}))
    with pytest.raises(ParseError, match="square"):
        read_scenarios(path)


def test_probabilities_must_sum_to_one():
    with pytest.raises(ValueError, match="sum to 1"):
        ScenarioSet(np.zeros((2, 3, 3)), np.array([0.5, 0.6]))
