"""
Oracle Module

Ground truth for small instances: every Hamiltonian tour is enumerated and, for each one,
a single LP chooses the time windows jointly against all scenarios.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from .config import ORACLE_MAX_N, WORKERS
from .lp_core import solve_lp
from .model import FirstStageSolution, Instance, ScenarioSet, build_route_timing_lp, evaluate, window_horizon

logger = logging.getLogger(__name__)


class TooLarge(ValueError):
    """Raised when an instance has too many customers to enumerate."""


def tour_count(n: int) -> int:
    """Tours through n customers anchored at the depot; both directions count."""
    return math.factorial(n)


def solve_route(instance: Instance, scenarios: ScenarioSet, route) -> Tuple[float, FirstStageSolution]:
    """Best windows for a fixed route and the resulting total expected cost; window starts stay within the horizon."""
    problem, index = build_route_timing_lp(
        instance, scenarios.times, scenarios.probs, route, ys_max=window_horizon(instance, scenarios)
    )
    outcome = solve_lp(problem)
    if not outcome.is_optimal:
        raise RuntimeError(f"route LP for {tuple(route)} is {outcome.status.value}")
    ys = outcome.primal[index["ys"]]
    ye = outcome.primal[index["ye"]]
    first_stage = FirstStageSolution(tuple(route), ys, ye)
    return first_stage.distance(instance) + float(outcome.objective_value), first_stage


def solve_exact(
    instance: Instance,
    scenarios: ScenarioSet,
    workers: int = WORKERS,
    max_n: int = ORACLE_MAX_N,
) -> Tuple[float, FirstStageSolution]:
    """
    Solve the TWATSP-ST by exhaustive enumeration.

    Args:
        instance: Problem data
        scenarios: Travel-time scenarios
        workers: Parallel route LPs (default: 1)
        max_n: Largest customer count accepted (default: 8)

    Returns:
        (optimal expected cost, optimal first stage); ties go to the first tour in
        lexicographic order

    Raises:
        TooLarge: If instance.n exceeds max_n
    """
    if instance.n > max_n:
        raise TooLarge(f"{instance.n} customers exceed the enumeration bound of {max_n}")
    routes = list(itertools.permutations(range(1, instance.n + 1)))
    logger.info("enumerating %d tours", len(routes))

    def run(route):
        return solve_route(instance, scenarios, route)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, routes))
    else:
        results = [run(r) for r in routes]

    best: Optional[Tuple[float, FirstStageSolution]] = None
    for cost, first_stage in results:
        if best is None or cost < best[0] - 1e-12:
            best = (cost, first_stage)
    return best


def recourse_of(first_stage: FirstStageSolution, instance: Instance, scenarios: ScenarioSet) -> float:
    """Expected second-stage cost of a first stage (total cost minus distance and width)."""
    total, _ = evaluate(instance, scenarios, first_stage)
    return total - first_stage.distance(instance) - first_stage.width_cost(instance)


def expected_cost(first_stage: FirstStageSolution, instance: Instance, scenarios: ScenarioSet) -> float:
    total, _ = evaluate(instance, scenarios, first_stage)
    return total
