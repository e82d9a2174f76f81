"""
Generic Two-Stage Module

The decomposition stated for a general two-stage stochastic MIP with continuous recourse:

    min  c.x + d.y + sum_w p_w f_w.z_w
    s.t. A x + B y >= a,  W_w x + T_w y + S_w z_w >= h_w,  z_w >= 0,  x integer

with a classical Benders loop that can run standard multicuts, the two-step scheme
(aggregated subproblem, generalized cut, strengthened multicuts) or generalized cuts only.
The small worked fixture from `toy_problem` is what the cut-count regression runs on.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import CUT_TOL, GAP_TOL
from .cuts import (
    Cut,
    CutFamily,
    CutPool,
    MasterPoint,
    feasibility_cut,
    generalized_cut,
    standard_multicut,
    strengthened_multicut,
)
from .lp_core import INF, LpBuilder, LpStatus, Sense, solve_lp, solve_lp_with_fixings
from .second_stage import ApResult, FeasibilityResult, SpDuals

logger = logging.getLogger(__name__)

INT_TOL = 1e-6


class CutMode(str, Enum):
    STANDARD = "standard"
    TWO_STEP = "two_step"
    GENERALIZED = "generalized"


@dataclass(frozen=True, eq=False)
class GenericScenario:
    p: float
    f: np.ndarray
    W: np.ndarray
    T: np.ndarray
    S: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("f", "W", "T", "S", "h"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        m = len(self.h)
        if self.W.shape[0] != m or self.T.shape[0] != m or self.S.shape[0] != m:
            raise ValueError("W, T, S and h must have one row per recourse constraint")
        if self.S.shape[1] != len(self.f):
            raise ValueError("S must have one column per recourse variable")


@dataclass(frozen=True, eq=False)
class GenericProblem:
    """Two-stage SMIP data; x is integer, y continuous, recourse z continuous and nonnegative."""

    c: np.ndarray
    d: np.ndarray
    x_lower: np.ndarray
    x_upper: np.ndarray
    y_lower: np.ndarray
    y_upper: np.ndarray
    scenarios: Tuple[GenericScenario, ...]
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None
    theta_lower: float = 0.0

    def __post_init__(self):
        for name in ("c", "d", "x_lower", "x_upper", "y_lower", "y_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not (len(self.x_lower) == len(self.x_upper) == len(self.c)):
            raise ValueError("x bounds must match the length of c")
        if not (len(self.y_lower) == len(self.y_upper) == len(self.d)):
            raise ValueError("y bounds must match the length of d")
        if np.any(self.x_lower > self.x_upper) or np.any(self.y_lower > self.y_upper):
            raise ValueError("lower bounds exceed upper bounds")
        if not self.scenarios:
            raise ValueError("at least one scenario is required")
        if abs(sum(s.p for s in self.scenarios) - 1.0) > 1e-12:
            raise ValueError("scenario probabilities must sum to 1")
        for k, s in enumerate(self.scenarios):
            if s.W.shape[1] != self.nx or s.T.shape[1] != self.ny:
                raise ValueError(f"scenario {k}: W/T column counts do not match x/y")
        if (self.A is None) != (self.a is None):
            raise ValueError("first-stage rows need both A and a")

    @property
    def nx(self) -> int:
        return len(self.c)

    @property
    def ny(self) -> int:
        return len(self.d)

    @property
    def first_stage_rows(self) -> List[Tuple[np.ndarray, np.ndarray, float]]:
        if self.a is None:
            return []
        A = np.asarray(self.A, dtype=float)
        B = np.zeros((len(self.a), self.ny)) if self.B is None else np.asarray(self.B, dtype=float)
        return [(A[i], B[i], float(self.a[i])) for i in range(len(self.a))]


def toy_problem() -> GenericProblem:
    """One-scenario fixture: min y + z over integer 0 <= x <= 10 and 2 <= y <= 8."""
    scenario = GenericScenario(
        p=1.0,
        f=[1.0],
        W=[[-2.0], [0.0], [2.0], [-5.0], [1.0]],
        T=[[-3.0], [3.0], [0.0], [10.0], [1.0]],
        S=[[5.0], [2.0], [-1.0], [2.0], [2.0]],
        h=[17.0, 10.0, -10.0, 11.0, 15.0],
    )
    return GenericProblem(
        c=[0.0],
        d=[1.0],
        x_lower=[0.0],
        x_upper=[10.0],
        y_lower=[2.0],
        y_upper=[8.0],
        scenarios=(scenario,),
    )


def _fixed_vars(lp: LpBuilder, lower: np.ndarray) -> np.ndarray:
    # fixing rows carry the sensitivity; nonnegative bounds only where the data allows them
    return np.array([lp.add_var(lo=0.0 if lo >= 0 else -INF) for lo in lower], dtype=int)


def _recourse_rows(lp: LpBuilder, s: GenericScenario, x, y, weight: float, slack_cost: Optional[float] = None):
    z = lp.add_vars(len(s.f))
    for k in range(len(s.f)):
        lp.set_cost(int(z[k]), 0.0 if slack_cost is not None else weight * s.f[k])
    for r in range(len(s.h)):
        coeffs = [(int(x[i]), s.W[r, i]) for i in range(len(x))]
        coeffs += [(int(y[i]), s.T[r, i]) for i in range(len(y))]
        coeffs += [(int(z[k]), s.S[r, k]) for k in range(len(z))]
        if slack_cost is not None:
            coeffs.append((lp.add_var(cost=slack_cost), 1.0))
        lp.add_row(coeffs, Sense.GE, s.h[r])
    return z


def solve_sp_generic(problem: GenericProblem, omega: int, x_fix, y_fix) -> Optional[SpDuals]:
    """Recourse LP of one scenario at fixed (x, y); None when it is infeasible there."""
    x_fix = np.asarray(x_fix, dtype=float)
    y_fix = np.asarray(y_fix, dtype=float)
    lp = LpBuilder()
    x = _fixed_vars(lp, problem.x_lower)
    y = _fixed_vars(lp, problem.y_lower)
    z = _recourse_rows(lp, problem.scenarios[omega], x, y, 1.0)
    fixings = {int(v): float(val) for v, val in zip(x, x_fix)}
    fixings.update({int(v): float(val) for v, val in zip(y, y_fix)})
    outcome = solve_lp_with_fixings(lp.build(), fixings)
    if outcome.status == LpStatus.INFEASIBLE:
        return None
    if not outcome.is_optimal:
        raise RuntimeError(f"recourse of scenario {omega} is {outcome.status.value}")
    return SpDuals(
        objective=float(outcome.objective_value),
        nu=np.array([outcome.fixing_duals[int(v)] for v in x]),
        eta=np.array([outcome.fixing_duals[int(v)] for v in y]),
        primal=outcome.primal[z].copy(),
        x_fix=x_fix,
        y_fix=y_fix,
        scenario=omega,
    )


def solve_ap_generic(problem: GenericProblem, x_fix, scenario_ids: Optional[Sequence[int]] = None) -> ApResult:
    """min d.y + sum p_w f_w.z_w over y and every z_w with x pinned."""
    x_fix = np.asarray(x_fix, dtype=float)
    ids = list(range(len(problem.scenarios))) if scenario_ids is None else list(scenario_ids)
    lp = LpBuilder()
    x = _fixed_vars(lp, problem.x_lower)
    y = np.array(
        [lp.add_var(lo, hi, cost) for lo, hi, cost in zip(problem.y_lower, problem.y_upper, problem.d)],
        dtype=int,
    )
    for ax, by, rhs in problem.first_stage_rows:
        lp.add_row([(int(x[i]), ax[i]) for i in range(problem.nx)] + [(int(y[i]), by[i]) for i in range(problem.ny)], Sense.GE, rhs)
    zs = [_recourse_rows(lp, problem.scenarios[w], x, y, problem.scenarios[w].p) for w in ids]
    outcome = solve_lp_with_fixings(lp.build(), {int(v): float(val) for v, val in zip(x, x_fix)})
    if outcome.status == LpStatus.INFEASIBLE:
        return ApResult(LpStatus.INFEASIBLE, x_fix, ids, farkas=outcome.farkas)
    if not outcome.is_optimal:
        raise RuntimeError(f"aggregated subproblem is {outcome.status.value}")
    y_bar = outcome.primal[y].copy()
    return ApResult(
        status=LpStatus.OPTIMAL,
        x_fix=x_fix,
        scenario_ids=ids,
        y_bar=y_bar,
        z_bar=[outcome.primal[z].copy() for z in zs],
        mu=np.array([outcome.fixing_duals[int(v)] for v in x]),
        objective=float(outcome.objective_value),
        width_cost=float(problem.d @ y_bar),
    )


def solve_feasibility_generic(problem: GenericProblem, x_fix, y_fix) -> FeasibilityResult:
    """Total slack needed by all scenarios' recourse rows at (x, y), with its multipliers."""
    x_fix = np.asarray(x_fix, dtype=float)
    y_fix = np.asarray(y_fix, dtype=float)
    lp = LpBuilder()
    x = _fixed_vars(lp, problem.x_lower)
    y = _fixed_vars(lp, problem.y_lower)
    for s in problem.scenarios:
        _recourse_rows(lp, s, x, y, 1.0, slack_cost=1.0)
    fixings = {int(v): float(val) for v, val in zip(x, x_fix)}
    fixings.update({int(v): float(val) for v, val in zip(y, y_fix)})
    outcome = solve_lp_with_fixings(lp.build(), fixings)
    if not outcome.is_optimal:
        raise RuntimeError(f"feasibility problem is {outcome.status.value}")
    return FeasibilityResult(
        epsilon_total=max(0.0, float(outcome.objective_value)),
        lam=np.array([outcome.fixing_duals[int(v)] for v in x]),
        beta=np.array([outcome.fixing_duals[int(v)] for v in y]),
        x_fix=x_fix,
        y_fix=y_fix,
    )


@dataclass
class GenericIteration:
    index: int
    point: MasterPoint
    lower_bound: float
    upper_bound: float
    cuts: List[Cut] = field(default_factory=list)


@dataclass
class GenericReport:
    status: str
    objective: float
    x: np.ndarray
    y: np.ndarray
    z: List[np.ndarray]
    lower_bound: float
    upper_bound: float
    cut_counts: Dict[str, int]
    master_nodes: int
    iterations: List[GenericIteration] = field(default_factory=list)

    @property
    def optimality_cuts(self) -> int:
        """Per-scenario optimality cuts (standard or strengthened) generated until convergence."""
        return self.cut_counts[CutFamily.STANDARD_MULTI.value] + self.cut_counts[CutFamily.STRENGTHENED_MULTI.value]

    def to_dict(self) -> Dict[str, object]:
        return {
            "status": self.status,
            "objective": self.objective,
            "x": self.x,
            "y": self.y,
            "z": [list(z) for z in self.z],
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "cut_counts": self.cut_counts,
            "optimality_cuts": self.optimality_cuts,
            "master_nodes": self.master_nodes,
            "iterations": [
                {
                    "x": it.point.x,
                    "y": it.point.y,
                    "Theta": it.point.Theta,
                    "lower_bound": it.lower_bound,
                    "upper_bound": it.upper_bound,
                    "cuts": [c.family.value for c in it.cuts],
                }
                for it in self.iterations
            ],
        }


def _master_lp(problem: GenericProblem, cuts: Sequence[Cut], x_lo: np.ndarray, x_hi: np.ndarray):
    lp = LpBuilder()
    x = np.array([lp.add_var(lo, hi, c) for lo, hi, c in zip(x_lo, x_hi, problem.c)], dtype=int)
    y = np.array([lp.add_var(lo, hi) for lo, hi in zip(problem.y_lower, problem.y_upper)], dtype=int)
    theta = lp.add_vars(len(problem.scenarios), lo=problem.theta_lower)
    d_min = float(np.minimum(problem.d * problem.y_lower, problem.d * problem.y_upper).sum())
    big_theta_lo = d_min + problem.theta_lower if np.isfinite(d_min) else -INF
    big_theta = lp.add_var(lo=big_theta_lo, cost=1.0)
    link = [(big_theta, 1.0)] + [(int(y[i]), -problem.d[i]) for i in range(problem.ny)]
    link += [(int(theta[w]), -s.p) for w, s in enumerate(problem.scenarios)]
    lp.add_row(link, Sense.GE, 0.0)
    for ax, by, rhs in problem.first_stage_rows:
        lp.add_row([(int(x[i]), ax[i]) for i in range(problem.nx)] + [(int(y[i]), by[i]) for i in range(problem.ny)], Sense.GE, rhs)
    for cut in cuts:
        coeffs = [(int(x[i]), cut.coeff_x[i]) for i in range(problem.nx)]
        coeffs += [(int(y[i]), cut.coeff_y[i]) for i in range(problem.ny)]
        if cut.aux == "theta":
            coeffs.append((int(theta[cut.scenario]), -1.0))
        elif cut.aux == "Theta":
            coeffs.append((big_theta, -1.0))
        lp.add_row(coeffs, Sense.LE, cut.rhs)
    return lp.build(), x, y, theta, big_theta


def _solve_master(problem: GenericProblem, cuts: Sequence[Cut]) -> Tuple[MasterPoint, float, int]:
    """Integer-optimal master by best-bound branch and bound; the down child is explored first."""
    best: Optional[Tuple[float, MasterPoint]] = None
    heap = [(-INF, 0, problem.x_lower.copy(), problem.x_upper.copy())]
    seq, nodes = 1, 0
    while heap:
        bound, _, lo, hi = heapq.heappop(heap)
        if best is not None and bound >= best[0] - 1e-9:
            continue
        lp, x, y, theta, big_theta = _master_lp(problem, cuts, lo, hi)
        outcome = solve_lp(lp)
        nodes += 1
        if outcome.status == LpStatus.INFEASIBLE:
            continue
        if outcome.status == LpStatus.UNBOUNDED:
            raise RuntimeError("master relaxation is unbounded; bound x or the recourse estimate")
        value = float(outcome.objective_value)
        if best is not None and value >= best[0] - 1e-9:
            continue
        sol = outcome.primal
        xv = sol[x]
        frac = np.abs(xv - np.round(xv))
        if frac.max(initial=0.0) <= INT_TOL:
            point = MasterPoint(
                x=np.round(xv),
                y=sol[y].copy(),
                theta={w: float(sol[t]) for w, t in enumerate(theta)},
                Theta=float(sol[big_theta]),
            )
            best = (value, point)
            continue
        k = int(np.argmax(frac))
        down_hi = hi.copy()
        down_hi[k] = math.floor(xv[k])
        up_lo = lo.copy()
        up_lo[k] = math.ceil(xv[k])
        heapq.heappush(heap, (value, seq, lo.copy(), down_hi))
        heapq.heappush(heap, (value, seq + 1, up_lo, hi.copy()))
        seq += 2
    if best is None:
        raise RuntimeError("master problem is infeasible")
    return best[1], best[0], nodes


def solve_generic(
    problem: GenericProblem,
    cut_mode: CutMode = CutMode.TWO_STEP,
    gap_tol: float = GAP_TOL,
    cut_tol: float = CUT_TOL,
    max_iterations: int = 200,
) -> GenericReport:
    """
    Classical Benders loop over an integer-optimal master.

    Each iteration solves the master, generates one cut per scenario (plus the generalized
    cut in the two-step and generalized modes) and tightens the upper bound with the exact
    cost of the first stage it evaluated. Every cut generated is counted, including the ones
    from the final iteration.

    Args:
        problem: Two-stage data
        cut_mode: standard, two_step or generalized (default: two_step)
        gap_tol: Relative gap at which the loop stops (default: 1e-6)
        cut_tol: Violation tolerance used when the master point is checked (default: 1e-6)
        max_iterations: Safety cap on master solves (default: 200)

    Returns:
        GenericReport with the optimal first stage, its recourse and the iteration trace
    """
    cut_mode = CutMode(cut_mode)
    pool = CutPool()
    counts = {family.value: 0 for family in CutFamily}
    trace: List[GenericIteration] = []
    omegas = range(len(problem.scenarios))
    lb, ub = -INF, INF
    best: Optional[Tuple[np.ndarray, np.ndarray, List[np.ndarray]]] = None
    total_nodes = 0
    status = "IterationLimit"

    for it in range(1, max_iterations + 1):
        point, lb, nodes = _solve_master(problem, pool.cuts())
        total_nodes += nodes
        x_star, y_star = point.x, point.y
        generated: List[Cut] = []
        candidate = None

        if cut_mode == CutMode.STANDARD:
            sps = [solve_sp_generic(problem, w, x_star, y_star) for w in omegas]
            if any(sp is None for sp in sps):
                generated.append(feasibility_cut(solve_feasibility_generic(problem, x_star, y_star), x_star, y_star))
            else:
                generated += [standard_multicut(sp, x_star, y_star, w) for w, sp in zip(omegas, sps)]
                value = float(problem.c @ x_star + problem.d @ y_star)
                value += sum(s.p * sp.objective for s, sp in zip(problem.scenarios, sps))
                candidate = (value, x_star, y_star, [sp.primal for sp in sps])
        else:
            ap = solve_ap_generic(problem, x_star)
            if not ap.feasible:
                generated.append(feasibility_cut(solve_feasibility_generic(problem, x_star, y_star), x_star, y_star))
            else:
                generated.append(generalized_cut(ap, x_star))
                if cut_mode == CutMode.TWO_STEP:
                    sps = [solve_sp_generic(problem, w, x_star, ap.y_bar) for w in omegas]
                    generated += [strengthened_multicut(sp, x_star, ap.y_bar, w) for w, sp in zip(omegas, sps)]
                candidate = (float(problem.c @ x_star + ap.objective), x_star, ap.y_bar, ap.z_bar)

        for cut in generated:
            counts[cut.family.value] += 1
            pool.add(cut, node=it, violation=cut.violation(point))
        if candidate is not None and candidate[0] < ub:
            ub = candidate[0]
            best = candidate[1:]
        logger.info("iteration %d: LB=%.6f UB=%.6f cuts=%d", it, lb, ub, len(generated))
        trace.append(GenericIteration(it, point, lb, ub, generated))
        if ub - lb <= gap_tol * max(1.0, abs(ub)):
            status = "Optimal"
            break
        if not any(c.violation(point) > cut_tol for c in generated):
            # nothing separates the master point yet the gap is open: bounds cannot move
            raise RuntimeError("Benders loop stalled without a violated cut")

    if best is None:
        raise RuntimeError("no feasible first stage found")
    x_best, y_best, z_best = best
    return GenericReport(
        status=status,
        objective=ub,
        x=np.asarray(x_best),
        y=np.asarray(y_best),
        z=[np.asarray(z) for z in z_best],
        lower_bound=lb,
        upper_bound=ub,
        cut_counts=counts,
        master_nodes=total_nodes,
        iterations=trace,
    )
