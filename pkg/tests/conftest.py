import numpy as np
import pytest

from twatsp_benders.generic import toy_problem
from twatsp_benders.model import Instance, ScenarioSet, generate_instance, sample_scenarios


@pytest.fixture
def toy():
    return toy_problem()


@pytest.fixture
def single_customer():
    """Depot at the origin, one customer 5 units away with service time 2."""
    return Instance(n=1, coords=np.array([[0.0, 0.0], [3.0, 4.0]]), service=np.array([0.0, 2.0]), T=20.0)


@pytest.fixture
def small_instance():
    return generate_instance("nw", 3, seed=1)


@pytest.fixture
def small_scenarios(small_instance):
    return sample_scenarios(small_instance, 3, seed=1)


@pytest.fixture
def four_customers():
    return generate_instance("nw", 4, seed=3)


@pytest.fixture
def four_customer_scenarios(four_customers):
    return sample_scenarios(four_customers, 4, seed=3)


def deterministic(instance: Instance, count: int = 1) -> ScenarioSet:
    """Scenarios whose travel times equal the distances."""
    return ScenarioSet(np.repeat(instance.d[None, :, :], count, axis=0), np.full(count, 1.0 / count))
