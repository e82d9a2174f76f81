"""
Second-Stage Module

Builders and solvers for the continuous subproblems of the decomposition: the
per-scenario subproblem SP(x, y, ω), the aggregated subproblem AP(x) that also chooses
the time windows, and the non-decomposed feasibility problem.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import WORKERS
from .lp_core import INF, LpBuilder, LpStatus, Sense, solve_lp_with_fixings
from .model import Instance, ScenarioSet, SecondStageSolution, window_horizon

logger = logging.getLogger(__name__)


@dataclass
class SpDuals:
    """SP optimum with the multipliers of its x- and y-fixing rows; only status is set when SP is infeasible."""

    objective: float
    nu: Optional[np.ndarray]
    eta: Optional[np.ndarray]
    primal: object
    x_fix: np.ndarray
    y_fix: np.ndarray
    scenario: Optional[int] = None
    status: LpStatus = LpStatus.OPTIMAL

    @property
    def feasible(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    @property
    def eta_s(self) -> np.ndarray:
        return self.eta[: len(self.eta) // 2]

    @property
    def eta_e(self) -> np.ndarray:
        return self.eta[len(self.eta) // 2 :]


@dataclass
class ApResult:
    status: LpStatus
    x_fix: np.ndarray
    scenario_ids: List[int]
    y_bar: Optional[np.ndarray] = None
    z_bar: List[object] = field(default_factory=list)
    mu: Optional[np.ndarray] = None
    objective: float = float("nan")
    width_cost: float = float("nan")
    farkas: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.status == LpStatus.OPTIMAL


@dataclass
class FeasibilityResult:
    epsilon_total: float
    lam: np.ndarray
    beta: np.ndarray
    x_fix: np.ndarray
    y_fix: np.ndarray


def recourse_big_m(instance: Instance, scenarios: ScenarioSet) -> float:
    """Big-M for the departure rows: any route duration plus waiting for a window that starts at the horizon."""
    return scenarios.big_M + instance.t0 + float(instance.service.sum()) + window_horizon(instance, scenarios)


def add_recourse_block(
    lp: LpBuilder,
    instance: Instance,
    t: np.ndarray,
    weight: float,
    x_vars: np.ndarray,
    ys_vars: np.ndarray,
    ye_vars: np.ndarray,
    big_m: float,
    slack_cost: Optional[float] = None,
) -> Dict[str, object]:
    """
    Add one scenario's timing variables and rows to an LP.

    Rows: departure propagation on every arc into a customer (relaxed by (1 - x_ij) * M),
    earliness, lateness and overtime. The block costs weight * (phi * (e + l) + psi * o);
    with slack_cost set, each row gets its own slack priced at slack_cost instead and the
    block costs nothing else.
    """
    n = instance.n
    s = instance.service
    c = 0.0 if slack_cost is not None else weight
    w = lp.add_vars(n + 1)
    lp.set_bounds(int(w[0]), instance.t0, instance.t0)
    e = lp.add_vars(n, cost=c * instance.phi)
    l = lp.add_vars(n, cost=c * instance.phi)
    o = lp.add_var(cost=c * instance.psi)
    rows = []

    def row(coeffs, rhs):
        if slack_cost is not None:
            coeffs[lp.add_var(cost=slack_cost)] = 1.0
        rows.append(lp.add_row(coeffs, Sense.GE, rhs))

    for k, (i, j) in enumerate(instance.arcs):
        if j == 0:
            continue
        row({int(w[j]): 1.0, int(w[i]): -1.0, int(x_vars[k]): -big_m}, t[i, j] + s[j] - big_m)
    for j in range(1, n + 1):
        row({int(e[j - 1]): 1.0, int(w[j]): 1.0, int(ys_vars[j - 1]): -1.0}, -s[j])
        row({int(l[j - 1]): 1.0, int(w[j]): -1.0, int(ye_vars[j - 1]): 1.0}, 0.0)
        row({o: 1.0, int(w[j]): -1.0}, t[j, 0] - instance.T)
    return {"w": w, "e": e, "l": l, "o": o, "rows": rows}


def _block_solution(x: np.ndarray, block: Dict[str, object], instance: Instance) -> SecondStageSolution:
    e, l, o = x[block["e"]], x[block["l"]], float(x[block["o"]])
    return SecondStageSolution(
        w=x[block["w"]].copy(),
        e=e.copy(),
        l=l.copy(),
        o=o,
        cost=float(instance.phi * (e.sum() + l.sum()) + instance.psi * o),
    )


def _first_stage_vars(lp: LpBuilder, instance: Instance, ys_max: float = INF):
    x = lp.add_vars(instance.num_arcs, lo=0.0, hi=INF)
    ys = lp.add_vars(instance.n, hi=ys_max)
    ye = lp.add_vars(instance.n)
    return x, ys, ye


def solve_sp(
    instance: Instance,
    scenarios: ScenarioSet,
    omega: int,
    x_fix: np.ndarray,
    y_fix: np.ndarray,
) -> SpDuals:
    """
    Solve SP(x, y, ω): the recourse LP of one scenario with x and y pinned by tracked rows.

    Args:
        instance: Problem data
        scenarios: Scenario set holding scenario omega
        omega: Scenario index
        x_fix: Arc values in [0, 1]; fractional values relax the departure rows proportionally
        y_fix: Windows as one vector, all ys then all ye

    Returns:
        SpDuals with the recourse value and the multipliers nu (per arc) and eta (per window
        bound). A fractional x can close a relaxed cycle of departure rows; SP is then
        returned with status Infeasible and no multipliers.
    """
    x_fix = np.asarray(x_fix, dtype=float)
    y_fix = np.asarray(y_fix, dtype=float)
    lp = LpBuilder()
    x, ys, ye = _first_stage_vars(lp, instance)
    big_m = recourse_big_m(instance, scenarios)
    block = add_recourse_block(lp, instance, scenarios.times[omega], 1.0, x, ys, ye, big_m)
    fixings = {int(v): float(val) for v, val in zip(x, x_fix)}
    fixings.update({int(v): float(val) for v, val in zip(np.concatenate([ys, ye]), y_fix)})
    outcome = solve_lp_with_fixings(lp.build(), fixings)
    if outcome.status == LpStatus.INFEASIBLE:
        logger.debug("SP for scenario %d infeasible at the given x", omega)
        return SpDuals(float("nan"), None, None, None, x_fix, y_fix, omega, status=LpStatus.INFEASIBLE)
    if not outcome.is_optimal:
        raise RuntimeError(f"SP for scenario {omega} unexpectedly {outcome.status.value}")
    return SpDuals(
        objective=float(outcome.objective_value),
        nu=np.array([outcome.fixing_duals[int(v)] for v in x]),
        eta=np.array([outcome.fixing_duals[int(v)] for v in np.concatenate([ys, ye])]),
        primal=_block_solution(outcome.primal, block, instance),
        x_fix=x_fix,
        y_fix=y_fix,
        scenario=omega,
    )


def solve_sps(
    instance: Instance,
    scenarios: ScenarioSet,
    omegas: Sequence[int],
    x_fix: np.ndarray,
    y_fix: np.ndarray,
    workers: int = WORKERS,
) -> List[SpDuals]:
    """Solve SP for several scenarios; results come back in the order of omegas."""

    def run(omega):
        return solve_sp(instance, scenarios, omega, x_fix, y_fix)

    if workers > 1 and len(omegas) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(run, omegas))
    return [run(w) for w in omegas]


def solve_ap(
    instance: Instance,
    scenarios: ScenarioSet,
    scenario_ids: Sequence[int],
    probs: Sequence[float],
    x_fix: np.ndarray,
) -> ApResult:
    """
    Solve AP(x): one LP over the windows y and every listed scenario's recourse, x pinned.

    The objective is sigma * total width + sum of probs[k] * recourse of scenario_ids[k]; the
    probabilities are used as given (no renormalization). Window starts are capped at the
    horizon the big-M covers. An infeasible AP is returned with its Farkas certificate
    instead of raising.
    """
    if len(scenario_ids) == 0:
        raise ValueError("AP needs at least one scenario")
    x_fix = np.asarray(x_fix, dtype=float)
    n = instance.n
    lp = LpBuilder()
    x, ys, ye = _first_stage_vars(lp, instance, ys_max=window_horizon(instance, scenarios))
    for i in range(n):
        lp.set_cost(int(ys[i]), -instance.sigma)
        lp.set_cost(int(ye[i]), instance.sigma)
        lp.add_row({int(ye[i]): 1.0, int(ys[i]): -1.0}, Sense.GE, instance.service[i + 1])
    big_m = recourse_big_m(instance, scenarios)
    blocks = [
        add_recourse_block(lp, instance, scenarios.times[w], p, x, ys, ye, big_m)
        for w, p in zip(scenario_ids, probs)
    ]
    outcome = solve_lp_with_fixings(lp.build(), {int(v): float(val) for v, val in zip(x, x_fix)})
    if outcome.status == LpStatus.INFEASIBLE:
        logger.info("AP infeasible at the given x")
        return ApResult(LpStatus.INFEASIBLE, x_fix, list(scenario_ids), farkas=outcome.farkas)
    if not outcome.is_optimal:
        raise RuntimeError(f"AP unexpectedly {outcome.status.value}")
    sol = outcome.primal
    y_bar = np.concatenate([sol[ys], sol[ye]])
    return ApResult(
        status=LpStatus.OPTIMAL,
        x_fix=x_fix,
        scenario_ids=list(scenario_ids),
        y_bar=y_bar,
        z_bar=[_block_solution(sol, b, instance) for b in blocks],
        mu=np.array([outcome.fixing_duals[int(v)] for v in x]),
        objective=float(outcome.objective_value),
        width_cost=float(instance.sigma * (y_bar[n:] - y_bar[:n]).sum()),
    )


def solve_feasibility(
    instance: Instance,
    scenarios: ScenarioSet,
    x_fix: np.ndarray,
    y_fix: np.ndarray,
) -> FeasibilityResult:
    """
    Minimize the total row violation of every scenario's recourse rows at a fixed (x, y).

    The problem is solved as one LP over all scenarios. epsilon_total is zero exactly when
    (x, y) admits a recourse in every scenario.
    """
    x_fix = np.asarray(x_fix, dtype=float)
    y_fix = np.asarray(y_fix, dtype=float)
    lp = LpBuilder()
    x, ys, ye = _first_stage_vars(lp, instance)
    big_m = recourse_big_m(instance, scenarios)
    for t in scenarios.times:
        add_recourse_block(lp, instance, t, 1.0, x, ys, ye, big_m, slack_cost=1.0)
    y_vars = np.concatenate([ys, ye])
    fixings = {int(v): float(val) for v, val in zip(x, x_fix)}
    fixings.update({int(v): float(val) for v, val in zip(y_vars, y_fix)})
    outcome = solve_lp_with_fixings(lp.build(), fixings)
    if not outcome.is_optimal:
        raise RuntimeError(f"feasibility problem unexpectedly {outcome.status.value}")
    return FeasibilityResult(
        epsilon_total=max(0.0, float(outcome.objective_value)),
        lam=np.array([outcome.fixing_duals[int(v)] for v in x]),
        beta=np.array([outcome.fixing_duals[int(v)] for v in y_vars]),
        x_fix=x_fix,
        y_fix=y_fix,
    )
