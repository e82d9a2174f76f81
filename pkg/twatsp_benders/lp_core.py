"""
Linear Programming Module

Two-phase revised simplex with an explicit dense basis inverse. Returns primal values,
dual multipliers for tracked rows, Farkas certificates for infeasible problems, and
unbounded rays. Every subproblem and master relaxation in the package runs on it.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import FEAS_TOL, OPT_TOL, PIVOT_TOL, REFACTOR_EVERY, STALL_LIMIT

logger = logging.getLogger(__name__)

INF = float("inf")


class NumericalBreakdown(RuntimeError):
    """Raised when the simplex cannot find a pivot of usable magnitude."""


class Sense(str, Enum):
    GE = ">="
    LE = "<="
    EQ = "="


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpRow:
    coeffs: Mapping[int, float]
    sense: Sense
    rhs: float


@dataclass(frozen=True)
class LpProblem:
    """Minimization LP: objective . x subject to rows and per-variable bounds."""

    num_vars: int
    objective: np.ndarray
    rows: Tuple[LpRow, ...]
    var_bounds: Tuple[Tuple[float, float], ...]
    tracked_rows: frozenset = frozenset()

    def __post_init__(self):
        if len(self.objective) != self.num_vars:
            raise ValueError("objective length does not match num_vars")
        if len(self.var_bounds) != self.num_vars:
            raise ValueError("var_bounds length does not match num_vars")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective has non-finite coefficients")
        for j, (lo, hi) in enumerate(self.var_bounds):
            if lo > hi:
                raise ValueError(f"variable {j}: lower bound {lo} exceeds upper bound {hi}")
            if lo == INF or hi == -INF:
                raise ValueError(f"variable {j}: infeasible infinite bound")
        for i, row in enumerate(self.rows):
            if not np.isfinite(row.rhs):
                raise ValueError(f"row {i}: non-finite rhs")
            for j, a in row.coeffs.items():
                if not 0 <= j < self.num_vars:
                    raise ValueError(f"row {i}: variable index {j} out of range")
                if not np.isfinite(a):
                    raise ValueError(f"row {i}: non-finite coefficient on variable {j}")
        for i in self.tracked_rows:
            if not 0 <= i < len(self.rows):
                raise ValueError(f"tracked row {i} does not exist")


@dataclass
class LpOutcome:
    status: LpStatus
    primal: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    duals: Dict[int, float] = field(default_factory=dict)
    farkas: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    fixing_duals: Dict[int, float] = field(default_factory=dict)
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


class LpBuilder:
    """Incremental construction of an LpProblem."""

    def __init__(self):
        self._costs: List[float] = []
        self._bounds: List[Tuple[float, float]] = []
        self._rows: List[LpRow] = []
        self._tracked: set = set()

    @property
    def num_vars(self) -> int:
        return len(self._costs)

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    def add_var(self, lo: float = 0.0, hi: float = INF, cost: float = 0.0) -> int:
        self._costs.append(float(cost))
        self._bounds.append((float(lo), float(hi)))
        return len(self._costs) - 1

    def add_vars(self, count: int, lo: float = 0.0, hi: float = INF, cost: float = 0.0) -> np.ndarray:
        return np.array([self.add_var(lo, hi, cost) for _ in range(count)], dtype=int)

    def set_cost(self, var: int, cost: float):
        self._costs[var] = float(cost)

    def set_bounds(self, var: int, lo: float, hi: float):
        self._bounds[var] = (float(lo), float(hi))

    def add_row(self, coeffs, sense: Sense, rhs: float, tracked: bool = False) -> int:
        merged: Dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            if a != 0.0:
                merged[int(j)] = merged.get(int(j), 0.0) + float(a)
        self._rows.append(LpRow(merged, Sense(sense), float(rhs)))
        if tracked:
            self._tracked.add(len(self._rows) - 1)
        return len(self._rows) - 1

    def build(self) -> LpProblem:
        return LpProblem(
            num_vars=len(self._costs),
            objective=np.array(self._costs, dtype=float),
            rows=tuple(self._rows),
            var_bounds=tuple(self._bounds),
            tracked_rows=frozenset(self._tracked),
        )


class _StandardForm:
    """min c.v  s.t.  A v = b, v >= 0, b >= 0, with the maps back to the original problem."""

    def __init__(self, problem: LpProblem):
        n = problem.num_vars
        self.problem = problem
        # each original variable is offset + sum(sign * v[col])
        self.var_cols: List[List[Tuple[int, float]]] = []
        self.offset = np.zeros(n)
        ub_rows: List[Tuple[int, float]] = []
        cols = 0
        for j, (lo, hi) in enumerate(problem.var_bounds):
            if np.isfinite(lo):
                self.offset[j] = lo
                self.var_cols.append([(cols, 1.0)])
                if np.isfinite(hi):
                    ub_rows.append((cols, hi - lo))
                cols += 1
            elif np.isfinite(hi):
                self.offset[j] = hi
                self.var_cols.append([(cols, -1.0)])
                cols += 1
            else:
                self.var_cols.append([(cols, 1.0), (cols + 1, -1.0)])
                cols += 2
        self.num_struct = cols

        m_orig = len(problem.rows)
        m = m_orig + len(ub_rows)
        self.m_orig = m_orig
        A_struct = np.zeros((m, cols))
        b_hat = np.zeros(m)
        is_ineq = np.zeros(m, dtype=bool)
        self.norm = np.ones(m_orig)
        for i, row in enumerate(problem.rows):
            sign = -1.0 if row.sense == Sense.LE else 1.0
            self.norm[i] = sign
            shift = 0.0
            for j, a in row.coeffs.items():
                shift += a * self.offset[j]
                for col, s in self.var_cols[j]:
                    A_struct[i, col] += sign * a * s
            b_hat[i] = sign * (row.rhs - shift)
            is_ineq[i] = row.sense != Sense.EQ
        for k, (col, width) in enumerate(ub_rows):
            A_struct[m_orig + k, col] = -1.0
            b_hat[m_orig + k] = -width
            is_ineq[m_orig + k] = True

        self.flip = np.where((b_hat < 0) | ((b_hat == 0) & is_ineq), -1.0, 1.0)
        ineq_rows = np.flatnonzero(is_ineq)
        self.num_slack = len(ineq_rows)
        A_slack = np.zeros((m, self.num_slack))
        for k, i in enumerate(ineq_rows):
            A_slack[i, k] = -1.0
        A_slack *= self.flip[:, None]
        A_struct *= self.flip[:, None]
        self.b = b_hat * self.flip

        # rows whose slack enters with +1 start basic on it, the rest get an artificial
        basis = np.full(m, -1, dtype=int)
        for k, i in enumerate(ineq_rows):
            if self.flip[i] < 0:
                basis[i] = cols + k
        need_art = np.flatnonzero(basis < 0)
        self.num_art = len(need_art)
        A_art = np.zeros((m, self.num_art))
        for k, i in enumerate(need_art):
            A_art[i, k] = 1.0
            basis[i] = cols + self.num_slack + k
        self.A = np.hstack([A_struct, A_slack, A_art])
        self.m = m
        self.N = self.A.shape[1]
        self.first_art = cols + self.num_slack
        self.initial_basis = basis
        self.c = np.zeros(self.N)
        for j in range(n):
            for col, s in self.var_cols[j]:
                self.c[col] += s * problem.objective[j]

    def to_original(self, v: np.ndarray) -> np.ndarray:
        x = self.offset.copy()
        for j, cols in enumerate(self.var_cols):
            for col, s in cols:
                x[j] += s * v[col]
        return x

    def direction_to_original(self, v: np.ndarray) -> np.ndarray:
        x = np.zeros(len(self.var_cols))
        for j, cols in enumerate(self.var_cols):
            for col, s in cols:
                x[j] += s * v[col]
        return x


class _Simplex:
    def __init__(self, sf: _StandardForm, feas_tol: float, opt_tol: float, pivot_tol: float):
        self.sf = sf
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.basis = sf.initial_basis.copy()
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        try:
            self.Binv = np.linalg.inv(self.sf.A[:, self.basis])
        except np.linalg.LinAlgError as e:
            raise NumericalBreakdown(f"singular basis at refactorization: {e}") from e
        self.xB = self.Binv @ self.sf.b
        self.xB[np.abs(self.xB) < 1e-13] = 0.0
        self._since_refactor = 0

    def duals(self, c: np.ndarray) -> np.ndarray:
        return c[self.basis] @ self.Binv

    def _pivot(self, r: int, q: int, alpha: np.ndarray, step: float):
        self.xB -= step * alpha
        self.xB[r] = step
        self.xB[(self.xB < 0) & (self.xB > -self.feas_tol)] = 0.0
        pivot_row = self.Binv[r] / alpha[r]
        self.Binv -= np.outer(alpha, pivot_row)
        self.Binv[r] = pivot_row
        self.basis[r] = q
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def run(self, c: np.ndarray, allowed: np.ndarray, max_iter: int):
        """Returns ("optimal", None) or ("unbounded", (q, alpha))."""
        stall = 0
        bland = False
        for _ in range(max_iter):
            y = self.duals(c)
            d = c - y @ self.sf.A
            d[self.basis] = 0.0
            d[~allowed] = 0.0
            if bland:
                order = np.flatnonzero(d < -self.opt_tol)
            else:
                neg = np.flatnonzero(d < -self.opt_tol)
                order = neg[np.argsort(d[neg], kind="stable")]
            if len(order) == 0:
                return "optimal", None
            pivoted = False
            for q in order:
                alpha = self.Binv @ self.sf.A[:, q]
                usable = alpha > self.pivot_tol
                if not usable.any():
                    if (alpha > 1e-12).any():
                        continue
                    return "unbounded", (int(q), alpha)
                ratios = np.full(len(alpha), INF)
                ratios[usable] = np.maximum(self.xB[usable], 0.0) / alpha[usable]
                step = ratios.min()
                ties = np.flatnonzero(ratios <= step + 1e-12 * max(1.0, step))
                if bland:
                    r = ties[np.argmin(self.basis[ties])]
                else:
                    # artificials leave first on ratio ties
                    art = ties[self.basis[ties] >= self.sf.first_art]
                    if len(art):
                        ties = art
                    best = alpha[ties].max()
                    near = ties[alpha[ties] >= best * (1 - 1e-9)]
                    r = near[np.argmin(self.basis[near])]
                if step <= self.feas_tol:
                    stall += 1
                    if stall >= STALL_LIMIT and not bland:
                        logger.debug("stalled after %d degenerate pivots, switching to Bland's rule", stall)
                        bland = True
                else:
                    stall = 0
                    bland = False
                self._pivot(int(r), int(q), alpha, step)
                pivoted = True
                break
            if not pivoted:
                raise NumericalBreakdown("no entering column admits a pivot above pivot_tol")
        raise NumericalBreakdown(f"iteration limit {max_iter} reached")

    def drive_out_artificials(self):
        sf = self.sf
        for r in range(sf.m):
            if self.basis[r] < sf.first_art:
                continue
            row = self.Binv[r] @ sf.A[:, : sf.first_art]
            row[self.basis[self.basis < sf.first_art]] = 0.0
            q = int(np.argmax(np.abs(row)))
            if abs(row[q]) <= self.pivot_tol:
                continue  # redundant row
            alpha = self.Binv @ sf.A[:, q]
            self._pivot(r, q, alpha, 0.0)
            self.xB[r] = 0.0


def solve_lp(
    problem: LpProblem,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
    pivot_tol: float = PIVOT_TOL,
) -> LpOutcome:
    """
    Solve a minimization LP with the two-phase revised simplex.

    Args:
        problem: The LP to solve
        feas_tol: Phase-one residual above which the problem is declared infeasible (default: 1e-7)
        opt_tol: Reduced-cost tolerance for optimality (default: 1e-7)
        pivot_tol: Smallest pivot magnitude accepted in the ratio test (default: 1e-9)

    Returns:
        LpOutcome with primal values, objective and tracked-row duals when optimal, a Farkas
        certificate (one multiplier per row, rows written as >= with <= rows negated) when
        infeasible, or an improving ray when unbounded.

    Raises:
        NumericalBreakdown: If no usable pivot exists or the iteration limit is reached.
    """
    sf = _StandardForm(problem)
    simplex = _Simplex(sf, feas_tol, opt_tol, pivot_tol)
    max_iter = 50 * (sf.m + sf.N) + 1000

    # Phase 1
    if sf.num_art:
        c1 = np.zeros(sf.N)
        c1[sf.first_art :] = 1.0
        allowed = np.ones(sf.N, dtype=bool)
        simplex.run(c1, allowed, max_iter)
        infeasibility = float(c1[simplex.basis] @ simplex.xB)
        if infeasibility > feas_tol * max(1.0, float(np.abs(sf.b).max(initial=0.0))):
            y1 = simplex.duals(c1)
            farkas = (y1 * sf.flip)[: sf.m_orig]
            scale = np.abs(farkas).max(initial=0.0)
            if scale > 0:
                farkas = farkas / scale
            logger.debug("infeasible LP: phase-one residual %.3e", infeasibility)
            return LpOutcome(LpStatus.INFEASIBLE, farkas=farkas, iterations=simplex.iterations)
        simplex.drive_out_artificials()

    # Phase 2
    allowed = np.ones(sf.N, dtype=bool)
    allowed[sf.first_art :] = False
    status, info = simplex.run(sf.c, allowed, max_iter)
    if status == "unbounded":
        q, alpha = info
        direction = np.zeros(sf.N)
        direction[q] = 1.0
        direction[simplex.basis] -= alpha
        return LpOutcome(
            LpStatus.UNBOUNDED,
            ray=sf.direction_to_original(direction),
            iterations=simplex.iterations,
        )

    v = np.zeros(sf.N)
    v[simplex.basis] = simplex.xB
    x = sf.to_original(v)
    y = simplex.duals(sf.c)
    duals = {
        i: float(y[i] * sf.flip[i] * sf.norm[i]) for i in sorted(problem.tracked_rows)
    }
    return LpOutcome(
        LpStatus.OPTIMAL,
        primal=x,
        objective_value=float(problem.objective @ x),
        duals=duals,
        iterations=simplex.iterations,
    )


def with_fixings(problem: LpProblem, fixings: Mapping[int, float]) -> Tuple[LpProblem, Dict[int, int]]:
    """Append one tracked equality row per fixed variable; returns the problem and var -> row map."""
    rows = list(problem.rows)
    tracked = set(problem.tracked_rows)
    row_of: Dict[int, int] = {}
    for j, value in fixings.items():
        lo, hi = problem.var_bounds[j]
        if not lo - FEAS_TOL <= value <= hi + FEAS_TOL:
            raise ValueError(f"fixing x[{j}] = {value} lies outside its bounds [{lo}, {hi}]")
        row_of[j] = len(rows)
        tracked.add(len(rows))
        rows.append(LpRow({j: 1.0}, Sense.EQ, float(value)))
    fixed = LpProblem(
        num_vars=problem.num_vars,
        objective=problem.objective,
        rows=tuple(rows),
        var_bounds=problem.var_bounds,
        tracked_rows=frozenset(tracked),
    )
    return fixed, row_of


def solve_lp_with_fixings(problem: LpProblem, fixings: Mapping[int, float], **tolerances) -> LpOutcome:
    """Solve with variables pinned by tracked equality rows; fixing_duals maps var -> multiplier."""
    fixed, row_of = with_fixings(problem, fixings)
    outcome = solve_lp(fixed, **tolerances)
    if outcome.is_optimal:
        outcome.fixing_duals = {j: outcome.duals[r] for j, r in row_of.items()}
    return outcome


def row_activity(row: LpRow, x: np.ndarray) -> float:
    return float(sum(a * x[j] for j, a in row.coeffs.items()))


def dual_objective(problem: LpProblem, duals: Mapping[int, float]) -> float:
    """Lagrangian dual value for multipliers on every row (duals as d objective / d rhs)."""
    pi = np.zeros(len(problem.rows))
    for i, v in duals.items():
        pi[i] = v
    reduced = problem.objective.copy()
    value = 0.0
    for i, row in enumerate(problem.rows):
        value += pi[i] * row.rhs
        for j, a in row.coeffs.items():
            reduced[j] -= pi[i] * a
    for j, (lo, hi) in enumerate(problem.var_bounds):
        r = reduced[j]
        if abs(r) <= 1e-12:
            continue
        if r > 0:
            value += r * lo if np.isfinite(lo) else -INF
        elif r < 0:
            value += r * hi if np.isfinite(hi) else -INF
    return value


def verify_farkas(problem: LpProblem, farkas: Sequence[float], tol: float = 1e-9) -> bool:
    """Check that the multipliers prove infeasibility over the variable box."""
    combined = np.zeros(problem.num_vars)
    rhs = 0.0
    for i, row in enumerate(problem.rows):
        f = farkas[i]
        if row.sense != Sense.EQ and f < -tol:
            return False
        sign = -1.0 if row.sense == Sense.LE else 1.0
        rhs += f * sign * row.rhs
        for j, a in row.coeffs.items():
            combined[j] += f * sign * a
    best = 0.0
    for j, (lo, hi) in enumerate(problem.var_bounds):
        g = combined[j]
        if abs(g) <= tol:
            continue
        bound = hi if g > 0 else lo
        if not np.isfinite(bound):
            return False
        best += g * bound
    return best < rhs - tol
