"""
Master Branch-and-Cut Module

The routing-and-windows master problem, its LP-based branch-and-cut tree and the cut
callback that ties the aggregated subproblem, the per-scenario subproblems, subtour
elimination and scenario retention together. The six method variants differ only in
whether the two-step cuts are used and in how scenarios are retained.
"""

import heapq
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from .config import (
    CUT_TOL,
    FRAC_ACTUAL,
    FRAC_ARTIFICIAL,
    GAP_TOL,
    NODE_LIMIT,
    ROOT_CUT_ROUNDS,
    TIME_LIMIT,
    WORKERS,
)
from .cuts import (
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
from .lp_core import INF, LpBuilder, LpProblem, LpRow, LpStatus, Sense, solve_lp
from .model import FirstStageSolution, Instance, ScenarioSet, cost_breakdown, evaluate, window_horizon
from .scenario_selection import RetentionPlan, build_plan
from .second_stage import add_recourse_block, recourse_big_m, solve_ap, solve_feasibility, solve_sps
from .serialization import dumps, read_model, write_json

logger = logging.getLogger(__name__)

INT_TOL = 1e-6

VARIANTS: Dict[str, Tuple[bool, str]] = {
    "bd": (False, "none"),
    "tbd": (True, "none"),
    "bdp": (False, "random"),
    "tbdp": (True, "random"),
    "bds": (False, "clustered"),
    "tbds": (True, "clustered"),
}


@dataclass(frozen=True)
class VariantConfig:
    """One method variant plus its limits; two_step x retention_mode names the variant."""

    two_step: bool = True
    retention_mode: str = "clustered"
    frac_actual: float = FRAC_ACTUAL
    frac_artificial: float = FRAC_ARTIFICIAL
    ap_scope: str = "sp_only"
    seed: int = 0
    time_limit: float = TIME_LIMIT
    node_limit: int = NODE_LIMIT
    gap_tol: float = GAP_TOL
    cut_tol: float = CUT_TOL
    root_cut_rounds: int = ROOT_CUT_ROUNDS
    fractional_cuts: int = 0
    fractional_strengthening: str = "off"
    workers: int = WORKERS
    cut_log: Optional[str] = None

    def __post_init__(self):
        if self.retention_mode not in ("none", "random", "clustered"):
            raise ValueError(f"retention_mode must be none, random or clustered, got '{self.retention_mode}'")
        if self.ap_scope not in ("sp_only", "all"):
            raise ValueError(f"ap_scope must be sp_only or all, got '{self.ap_scope}'")
        if self.fractional_strengthening != "off":
            raise ValueError("fractional_strengthening only supports 'off'")
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("time_limit and node_limit must be positive")
        if self.root_cut_rounds < 0 or self.fractional_cuts < 0:
            raise ValueError("cut round limits must be nonnegative")

    @property
    def name(self) -> str:
        for name, key in VARIANTS.items():
            if key == (self.two_step, self.retention_mode):
                return name
        raise KeyError((self.two_step, self.retention_mode))

    @classmethod
    def for_variant(cls, name: str, **overrides) -> "VariantConfig":
        try:
            two_step, mode = VARIANTS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown variant '{name}'; choose from {', '.join(VARIANTS)}") from None
        return cls(two_step=two_step, retention_mode=mode, **overrides)


@dataclass
class NodeRecord:
    id: int
    bound: float
    fixings: Dict[int, int] = field(default_factory=dict)
    depth: int = 0
    status: str = "open"

    def __post_init__(self):
        for arc, value in self.fixings.items():
            if value not in (0, 1):
                raise ValueError(f"arc {arc} fixed to {value}; fixings must be 0 or 1")

    def __lt__(self, other: "NodeRecord") -> bool:
        return (self.bound, self.id) < (other.bound, other.id)


@dataclass
class MasterState:
    instance: Instance
    scenarios: ScenarioSet
    plan: RetentionPlan
    config: VariantConfig
    base: LpProblem
    x: np.ndarray
    ys: np.ndarray
    ye: np.ndarray
    theta: Dict[int, int]
    Theta: int
    blocks: List[Dict[str, object]]
    pool: CutPool = field(default_factory=CutPool)
    cut_rows: List[LpRow] = field(default_factory=list)
    incumbent: Optional[FirstStageSolution] = None
    upper_bound: float = INF
    lower_bound: float = -INF
    incumbent_trace: List[Tuple[int, float, float]] = field(default_factory=list)
    cut_counts_root: Dict[str, int] = field(default_factory=lambda: {f.value: 0 for f in CutFamily})
    cut_counts_tree: Dict[str, int] = field(default_factory=lambda: {f.value: 0 for f in CutFamily})
    callbacks: int = 0
    started: float = field(default_factory=time.perf_counter)

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started

    def prune_level(self) -> float:
        if not np.isfinite(self.upper_bound):
            return INF
        return self.upper_bound - self.config.gap_tol * max(1.0, abs(self.upper_bound))


@dataclass
class SolveReport:
    """Outcome of one solve. bound_trace holds (node, best open bound, incumbent value) as nodes leave the queue."""

    status: str
    variant: str
    incumbent: Optional[FirstStageSolution]
    lower_bound: float
    upper_bound: float
    root_lower_bound: float
    root_upper_bound: float
    root_cut_rounds: int
    cut_counts: Dict[str, int]
    root_cut_counts: Dict[str, int]
    tree_cut_counts: Dict[str, int]
    nodes_explored: int
    nodes_open: int
    iterations: int
    plan_summary: Dict[str, int]
    incumbent_trace: List[Tuple[int, float, float]] = field(default_factory=list)
    wall_ms: float = 0.0
    breakdown: Optional[Dict[str, float]] = None
    instance_name: str = ""
    num_customers: int = 0
    num_scenarios: int = 0
    bound_trace: List[Tuple[int, float, float]] = field(default_factory=list)
    pool: Optional[CutPool] = None

    @property
    def objective(self) -> float:
        return self.upper_bound

    @property
    def gap_pct(self) -> float:
        if not np.isfinite(self.upper_bound) or self.upper_bound == 0:
            return float("nan") if not np.isfinite(self.upper_bound) else 0.0
        return max(0.0, (self.upper_bound - self.lower_bound) / abs(self.upper_bound) * 100.0)

    @property
    def root_gap_pct(self) -> float:
        if not np.isfinite(self.root_upper_bound) or self.root_lower_bound <= 0:
            return float("nan")
        return max(0.0, (self.root_upper_bound - self.root_lower_bound) / self.root_lower_bound * 100.0)

    @property
    def optimality_cuts(self) -> int:
        return sum(self.cut_counts[f.value] for f in (CutFamily.STANDARD_MULTI, CutFamily.STRENGTHENED_MULTI, CutFamily.GENERALIZED))

    def to_dict(self, timing: bool = True) -> Dict[str, object]:
        out: Dict[str, object] = {
            "instance": self.instance_name,
            "n": self.num_customers,
            "scenarios": self.num_scenarios,
            "variant": self.variant,
            "status": self.status,
            "objective": self.upper_bound,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "gap_pct": self.gap_pct,
            "root_lower_bound": self.root_lower_bound,
            "root_upper_bound": self.root_upper_bound,
            "root_gap_pct": self.root_gap_pct,
            "root_cut_rounds": self.root_cut_rounds,
            "cut_counts": self.cut_counts,
            "root_cut_counts": self.root_cut_counts,
            "tree_cut_counts": self.tree_cut_counts,
            "nodes_explored": self.nodes_explored,
            "nodes_open": self.nodes_open,
            "iterations": self.iterations,
            "plan": self.plan_summary,
            "incumbent": None,
            "breakdown": self.breakdown,
        }
        if self.incumbent is not None:
            out["incumbent"] = {
                "route": list(self.incumbent.route),
                "ys": self.incumbent.ys,
                "ye": self.incumbent.ye,
            }
        if timing:
            out["wall_ms"] = self.wall_ms
            out["incumbent_trace"] = [{"node": n, "ms": ms, "upper_bound": ub} for n, ms, ub in self.incumbent_trace]
        else:
            out["incumbent_trace"] = [{"node": n, "upper_bound": ub} for n, _, ub in self.incumbent_trace]
        return out

    def to_json(self, timing: bool = True) -> str:
        return dumps(self.to_dict(timing))


class IncumbentRecord(BaseModel):
    route: List[int]
    ys: List[float]
    ye: List[float]


class SolveReportFile(BaseModel):
    """Schema of a written SolveReport; the bench reads runs back through it."""

    instance: str
    n: int
    scenarios: int
    variant: str
    status: str
    objective: Optional[float]
    lower_bound: Optional[float]
    upper_bound: Optional[float]
    gap_pct: Optional[float]
    root_lower_bound: Optional[float]
    root_upper_bound: Optional[float]
    root_gap_pct: Optional[float]
    root_cut_rounds: int
    cut_counts: Dict[str, int]
    root_cut_counts: Dict[str, int]
    tree_cut_counts: Dict[str, int]
    nodes_explored: int
    nodes_open: int
    iterations: int
    plan: Dict[str, int]
    incumbent: Optional[IncumbentRecord] = None
    breakdown: Optional[Dict[str, float]] = None
    wall_ms: Optional[float] = None


def write_report(report: SolveReport, path, timing: bool = True):
    return write_json(path, report.to_dict(timing))


def read_report(path) -> SolveReportFile:
    return read_model(path, SolveReportFile)


def build_master(instance: Instance, scenarios: ScenarioSet, plan: RetentionPlan, config: VariantConfig) -> MasterState:
    """
    Assemble the master LP relaxation.

    Rows: in/out degree of every node, minimum window widths (window starts capped at the
    horizon the big-M covers), the Θ link row
    Θ >= sigma * total width + sum over subproblem scenarios of p * θ, one recourse block
    per retained scenario (priced in the objective) and one per artificial scenario (priced
    only through its linkage row sum alpha * θ >= block cost). x is relaxed to [0, 1] and
    subtour rows are added lazily.
    """
    if plan.num_scenarios != len(scenarios):
        raise ValueError("retention plan was built for a different scenario set")
    n = instance.n
    lp = LpBuilder()
    x = np.array([lp.add_var(0.0, 1.0, cost) for cost in instance.arc_cost], dtype=int)
    ys = lp.add_vars(n, hi=window_horizon(instance, scenarios))
    ye = lp.add_vars(n)
    theta = {w: lp.add_var() for w in plan.omega_sp}
    Theta = lp.add_var(cost=1.0)

    for node in range(n + 1):
        lp.add_row({int(x[k]): 1.0 for k, (i, _) in enumerate(instance.arcs) if i == node}, Sense.EQ, 1.0)
        lp.add_row({int(x[k]): 1.0 for k, (_, j) in enumerate(instance.arcs) if j == node}, Sense.EQ, 1.0)
    for i in range(n):
        lp.add_row({int(ye[i]): 1.0, int(ys[i]): -1.0}, Sense.GE, instance.service[i + 1])
    link = {Theta: 1.0}
    for i in range(n):
        link[int(ye[i])] = -instance.sigma
        link[int(ys[i])] = instance.sigma
    for w, var in theta.items():
        link[var] = -float(scenarios.probs[w])
    lp.add_row(link, Sense.GE, 0.0)

    big_m = recourse_big_m(instance, scenarios)
    blocks = []
    for w in plan.omega_mp1:
        blocks.append(add_recourse_block(lp, instance, scenarios.times[w], float(scenarios.probs[w]), x, ys, ye, big_m))
    for art in plan.omega_mp2:
        block = add_recourse_block(lp, instance, art.times, 0.0, x, ys, ye, big_m)
        linkage = {theta[w]: a for w, a in art.linkage().items()}
        for var in list(block["e"]) + list(block["l"]):
            linkage[int(var)] = -instance.phi
        linkage[int(block["o"])] = -instance.psi
        lp.add_row(linkage, Sense.GE, 0.0)
        blocks.append(block)

    logger.info(
        "master: %d arcs, %d theta, %d retained, %d artificial",
        len(x), len(theta), len(plan.omega_mp1), len(plan.omega_mp2),
    )
    return MasterState(
        instance=instance,
        scenarios=scenarios,
        plan=plan,
        config=config,
        base=lp.build(),
        x=x,
        ys=ys,
        ye=ye,
        theta=theta,
        Theta=Theta,
        blocks=blocks,
    )


def _cut_row(state: MasterState, cut: Cut) -> LpRow:
    coeffs: Dict[int, float] = {}
    for var, a in zip(state.x, cut.coeff_x):
        if a != 0.0:
            coeffs[int(var)] = float(a)
    for var, a in zip(np.concatenate([state.ys, state.ye]), cut.coeff_y):
        if a != 0.0:
            coeffs[int(var)] = float(a)
    if cut.aux == THETA:
        coeffs[state.theta[cut.scenario]] = -1.0
    elif cut.aux == BIG_THETA:
        coeffs[state.Theta] = -1.0
    return LpRow(coeffs, Sense.LE, cut.rhs)


def node_problem(state: MasterState, fixings: Dict[int, int]) -> LpProblem:
    """Base master plus every pooled cut, with branching fixings applied as bounds."""
    bounds = list(state.base.var_bounds)
    for arc, value in fixings.items():
        bounds[int(state.x[arc])] = (float(value), float(value))
    return LpProblem(
        num_vars=state.base.num_vars,
        objective=state.base.objective,
        rows=state.base.rows + tuple(state.cut_rows),
        var_bounds=tuple(bounds),
    )


def _master_point(state: MasterState, sol: np.ndarray) -> MasterPoint:
    return MasterPoint(
        x=sol[state.x].copy(),
        y=np.concatenate([sol[state.ys], sol[state.ye]]),
        theta={w: float(sol[v]) for w, v in state.theta.items()},
        Theta=float(sol[state.Theta]),
    )


def _add_cuts(state: MasterState, node: NodeRecord, point: MasterPoint, cuts: List[Cut]) -> List[Cut]:
    added = []
    counts = state.cut_counts_root if node.depth == 0 else state.cut_counts_tree
    for cut in cuts:
        violation = cut.violation(point)
        if state.pool.add(cut, node.id, violation):
            state.cut_rows.append(_cut_row(state, cut))
            counts[cut.family.value] += 1
            added.append(cut)
    return added


def _violated(state: MasterState, point: MasterPoint, cuts: List[Cut]) -> List[Cut]:
    return [c for c in cuts if is_violated(c, point, state.config.cut_tol * max(1.0, abs(c.rhs)))]


def _offer_incumbent(state: MasterState, node: NodeRecord, x: np.ndarray, y: np.ndarray) -> bool:
    candidate = FirstStageSolution.from_vectors(state.instance, x, y)
    ys = np.maximum(candidate.ys, 0.0)
    ye = np.maximum(candidate.ye, ys + state.instance.customer_service())
    candidate = FirstStageSolution(candidate.route, ys, ye)
    value, _ = evaluate(state.instance, state.scenarios, candidate, workers=state.config.workers)
    if value < state.upper_bound - 1e-12:
        state.upper_bound = value
        state.incumbent = candidate
        state.incumbent_trace.append((node.id, state.elapsed * 1000.0, value))
        logger.info("node %d: new incumbent %.6f route=%s", node.id, value, candidate.route)
        return True
    return False


def _feasibility_cuts(state: MasterState, x: np.ndarray, y: np.ndarray) -> List[Cut]:
    """Feasibility cut at a point where some scenario has no recourse; empty when the violation is within tolerance."""
    feas = solve_feasibility(state.instance, state.scenarios, x, y)
    try:
        return [feasibility_cut(feas, x, y, tol=state.config.cut_tol)]
    except InvalidCall:
        logger.debug("recourse violation %.3e below tolerance", feas.epsilon_total)
        return []


def _two_step_cuts(state: MasterState, point: MasterPoint, x_bar: np.ndarray) -> Tuple[List[Cut], Optional[np.ndarray]]:
    """AP(x̄), then the generalized cut and strengthened multicuts at (x̄, ȳ)."""
    plan = state.plan
    retained = bool(plan.omega_mp1 or plan.omega_mp2)
    if state.config.ap_scope == "all":
        ids = list(range(len(state.scenarios)))
    else:
        ids = list(plan.omega_sp)
    if not ids:
        return [], None
    probs = [float(state.scenarios.probs[w]) for w in ids]
    ap = solve_ap(state.instance, state.scenarios, ids, probs, x_bar)
    if not ap.feasible:
        return _feasibility_cuts(state, x_bar, point.y), None
    cuts: List[Cut] = []
    if state.config.ap_scope == "sp_only" or not retained:
        cuts.append(generalized_cut(ap, x_bar))
    sps = solve_sps(state.instance, state.scenarios, plan.omega_sp, x_bar, ap.y_bar, workers=state.config.workers)
    if not all(sp.feasible for sp in sps):
        return _feasibility_cuts(state, x_bar, ap.y_bar), None
    cuts += [strengthened_multicut(sp, x_bar, ap.y_bar, w) for w, sp in zip(plan.omega_sp, sps)]
    return cuts, ap.y_bar


def _standard_cuts(state: MasterState, point: MasterPoint) -> List[Cut]:
    omegas = state.plan.omega_sp
    sps = solve_sps(state.instance, state.scenarios, omegas, point.x, point.y, workers=state.config.workers)
    if not all(sp.feasible for sp in sps):
        return _feasibility_cuts(state, point.x, point.y)
    return [standard_multicut(sp, point.x, point.y, w) for w, sp in zip(omegas, sps)]


@dataclass
class CallbackResult:
    cuts: List[Cut]
    closed: bool = False


def cut_callback(state: MasterState, node: NodeRecord, point: MasterPoint, lp_value: float) -> CallbackResult:
    """
    Separate the node relaxation optimum.

    Integral points: subtour cuts first; then, for two-step variants, AP(x̄) and the cuts at
    (x̄, ȳ), with (x̄, ȳ) always offered as an incumbent; for the others, standard multicuts
    at (x̄, y*). When nothing new separates an integral point, the node is closed: either its
    bound already reaches the incumbent, or standard multicuts at (x̄, y*) find no violation
    and (x̄, y*) itself is offered. Fractional points get the same cuts without subtours or
    incumbents.
    """
    state.callbacks += 1
    x = point.x
    integral = bool(np.all(np.minimum(x, 1.0 - x) <= INT_TOL))
    if integral:
        x = np.round(x)
        point = replace(point, x=x)
        tours = subtour_cuts(state.instance, x)
        if tours:
            return CallbackResult(_add_cuts(state, node, point, tours))

    if state.config.two_step:
        cuts, y_bar = _two_step_cuts(state, point, x)
        if integral and y_bar is not None:
            _offer_incumbent(state, node, x, y_bar)
    else:
        cuts = _standard_cuts(state, point)
        if integral:
            _offer_incumbent(state, node, x, point.y)
    added = _add_cuts(state, node, point, _violated(state, point, cuts))
    if added or not integral:
        return CallbackResult(added)

    if lp_value >= state.prune_level():
        return CallbackResult([], closed=True)
    if state.config.two_step:
        added = _add_cuts(state, node, point, _violated(state, point, _standard_cuts(state, point)))
        if added:
            return CallbackResult(added)
    _offer_incumbent(state, node, x, point.y)
    return CallbackResult([], closed=True)


def branch(state: MasterState, node: NodeRecord, point: MasterPoint, next_id: int) -> Tuple[NodeRecord, NodeRecord]:
    """Fix the most fractional arc (lowest index on ties) to 0 in one child and 1 in the other."""
    score = np.minimum(point.x, 1.0 - point.x)
    k = int(np.argmax(score))
    if score[k] <= INT_TOL:
        raise InvalidCall("cannot branch on an integral point")
    down = NodeRecord(next_id, node.bound, {**node.fixings, k: 0}, node.depth + 1)
    up = NodeRecord(next_id + 1, node.bound, {**node.fixings, k: 1}, node.depth + 1)
    return down, up


def root_relaxation_value(state: MasterState) -> float:
    """LP value of the master with no cuts at all."""
    outcome = solve_lp(node_problem(state, {}))
    return float(outcome.objective_value)


def _empty_counts() -> Dict[str, int]:
    return {f.value: 0 for f in CutFamily}


def solve(
    instance: Instance,
    scenarios: ScenarioSet,
    config: Optional[VariantConfig] = None,
    plan: Optional[RetentionPlan] = None,
) -> SolveReport:
    """
    Solve the TWATSP-ST by branch and cut.

    Args:
        instance: Problem data
        scenarios: Travel-time scenarios
        config: Variant and limits (default: VariantConfig())
        plan: Retention plan; built from config when omitted

    Returns:
        SolveReport with status Optimal, TimeLimit or NodeLimit and the best bounds found
    """
    config = config or VariantConfig()
    started = time.perf_counter()
    if plan is None:
        plan = build_plan(
            instance,
            scenarios,
            config.frac_actual,
            config.frac_artificial,
            mode=config.retention_mode,
            seed=config.seed,
            workers=config.workers,
        )
    state = build_master(instance, scenarios, plan, config)
    state.started = started

    heap: List[NodeRecord] = [NodeRecord(0, -INF)]
    bound_trace: List[Tuple[int, float, float]] = []
    next_id = 1
    explored = 0
    status = "Optimal"
    root_lb, root_ub, root_rounds = -INF, INF, 0
    current: Optional[NodeRecord] = None
    current_value = -INF

    while heap:
        node = heapq.heappop(heap)
        if node.bound >= state.prune_level():
            node.status = "pruned"
            continue
        if state.elapsed >= config.time_limit or explored >= config.node_limit:
            status = "TimeLimit" if state.elapsed >= config.time_limit else "NodeLimit"
            heapq.heappush(heap, node)
            break
        explored += 1
        current, current_value = node, node.bound
        bound_trace.append((node.id, node.bound, state.upper_bound))
        rounds = 0
        max_rounds = config.root_cut_rounds if node.depth == 0 else config.fractional_cuts
        while True:
            outcome = solve_lp(node_problem(state, node.fixings))
            if outcome.status == LpStatus.INFEASIBLE:
                node.status = "pruned"
                break
            if outcome.status != LpStatus.OPTIMAL:
                raise RuntimeError(f"node {node.id} relaxation is {outcome.status.value}")
            value = float(outcome.objective_value)
            current_value = max(current_value, value)
            if node.depth == 0:
                root_lb = value
            if value >= state.prune_level():
                node.status = "pruned"
                break
            point = _master_point(state, outcome.primal)
            integral = bool(np.all(np.minimum(point.x, 1.0 - point.x) <= INT_TOL))
            if not integral and rounds >= max_rounds:
                down, up = branch(state, node, point, next_id)
                down.bound = up.bound = value
                next_id += 2
                heapq.heappush(heap, down)
                heapq.heappush(heap, up)
                node.status = "branched"
                break
            if state.elapsed >= config.time_limit:
                break
            result = cut_callback(state, node, point, value)
            if not integral:
                rounds += 1
                if node.depth == 0:
                    root_rounds = rounds
            if result.closed:
                node.status = "closed"
                break
            if not result.cuts:
                if integral:
                    node.status = "closed"
                    break
                rounds = max_rounds
        if node.depth == 0:
            root_ub = state.upper_bound
            logger.info("root: LB=%.6f UB=%.6f after %d cut rounds", root_lb, root_ub, root_rounds)
        if node.status == "open":
            status = "TimeLimit"
            break
        current = None

    open_bounds = [n.bound for n in heap]
    if current is not None:
        open_bounds.append(current_value)
    if status == "Optimal":
        if state.incumbent is None:
            raise RuntimeError("search ended without a feasible route")
        state.lower_bound = state.upper_bound
    else:
        state.lower_bound = min(open_bounds) if open_bounds else state.upper_bound
        state.lower_bound = min(state.lower_bound, state.upper_bound)
        logger.warning("stopped on %s: LB=%.6f UB=%.6f", status, state.lower_bound, state.upper_bound)

    counts = _empty_counts()
    for family in counts:
        counts[family] = state.cut_counts_root[family] + state.cut_counts_tree[family]
    breakdown = None
    if state.incumbent is not None:
        cb = cost_breakdown(instance, scenarios, state.incumbent)
        breakdown = {
            "distance": cb.distance,
            "width": cb.width,
            "penalty": cb.penalty,
            "overtime": cb.overtime,
            "expected_late_customers": cb.expected_late_customers,
            "total": cb.total,
        }
    if config.cut_log:
        state.pool.write_log(config.cut_log)
    return SolveReport(
        status=status,
        variant=config.name,
        incumbent=state.incumbent,
        lower_bound=state.lower_bound,
        upper_bound=state.upper_bound,
        root_lower_bound=root_lb,
        root_upper_bound=root_ub,
        root_cut_rounds=root_rounds,
        cut_counts=counts,
        root_cut_counts=dict(state.cut_counts_root),
        tree_cut_counts=dict(state.cut_counts_tree),
        nodes_explored=explored,
        nodes_open=len([n for n in heap if n.bound < state.prune_level()]),
        iterations=state.callbacks,
        plan_summary=plan.summary(),
        incumbent_trace=list(state.incumbent_trace),
        bound_trace=bound_trace,
        pool=state.pool,
        wall_ms=state.elapsed * 1000.0,
        breakdown=breakdown,
        instance_name=instance.name,
        num_customers=instance.n,
        num_scenarios=len(scenarios),
    )
