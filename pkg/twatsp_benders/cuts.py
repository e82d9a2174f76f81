"""
Cuts Module

Constructors for the Benders cut families and DFJ subtour elimination, a single
violation predicate for all of them, and the cut pool that masters draw rows from.

Every cut is stored as
    coeff_x . x + coeff_y . y - aux <= rhs
where aux is θ_ω (multi-cuts), Θ (generalized cuts) or absent.
"""

import csv
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import networkx as nx
import numpy as np

from .config import CUT_TOL
from .second_stage import ApResult, FeasibilityResult, SpDuals

logger = logging.getLogger(__name__)


class InvalidCall(ValueError):
    """Raised when a cut is requested at a point that cannot produce one."""


class CutFamily(str, Enum):
    STANDARD_MULTI = "StandardMulti"
    STRENGTHENED_MULTI = "StrengthenedMulti"
    GENERALIZED = "Generalized"
    FEASIBILITY = "Feasibility"
    SUBTOUR = "SubtourElim"


THETA = "theta"
BIG_THETA = "Theta"


@dataclass
class MasterPoint:
    """A master solution: arcs (or generic x), windows (or generic y), θ per scenario, Θ."""

    x: np.ndarray
    y: np.ndarray
    theta: Dict[int, float] = field(default_factory=dict)
    Theta: float = 0.0


@dataclass(frozen=True, eq=False)
class Cut:
    family: CutFamily
    coeff_x: np.ndarray
    coeff_y: np.ndarray
    rhs: float
    scenario: Optional[int] = None
    aux: Optional[str] = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.coeff_x)) and np.all(np.isfinite(self.coeff_y)) and np.isfinite(self.rhs)):
            raise ValueError(f"{self.family.value} cut has non-finite coefficients")
        multi = self.family in (CutFamily.STANDARD_MULTI, CutFamily.STRENGTHENED_MULTI)
        if multi and (self.aux != THETA or self.scenario is None):
            raise ValueError("multi-optimality cuts bound exactly one θ_ω")
        if self.family == CutFamily.GENERALIZED and self.aux != BIG_THETA:
            raise ValueError("generalized cuts bound Θ")
        if self.family in (CutFamily.FEASIBILITY, CutFamily.SUBTOUR) and self.aux is not None:
            raise ValueError(f"{self.family.value} cuts carry no auxiliary variable")

    @property
    def coeff_ys(self) -> np.ndarray:
        return self.coeff_y[: len(self.coeff_y) // 2]

    @property
    def coeff_ye(self) -> np.ndarray:
        return self.coeff_y[len(self.coeff_y) // 2 :]

    def aux_value(self, point: MasterPoint) -> float:
        if self.aux == THETA:
            return float(point.theta.get(self.scenario, 0.0))
        if self.aux == BIG_THETA:
            return float(point.Theta)
        return 0.0

    def violation(self, point: MasterPoint) -> float:
        lhs = float(self.coeff_x @ point.x + self.coeff_y @ point.y) - self.aux_value(point)
        return lhs - self.rhs

    def bound_at(self, x: np.ndarray, y: np.ndarray) -> float:
        """Lower bound the cut places on its auxiliary variable at (x, y)."""
        return float(self.coeff_x @ x + self.coeff_y @ y) - self.rhs

    def key(self):
        coeffs = np.round(np.concatenate([self.coeff_x, self.coeff_y, [self.rhs]]), 9) + 0.0
        return (self.family, self.scenario, self.aux, hash(coeffs.tobytes()))


def _optimality_multicut(family: CutFamily, sp: SpDuals, x0: np.ndarray, y0: np.ndarray, omega: int) -> Cut:
    if not sp.feasible:
        raise InvalidCall(f"scenario {omega} has no recourse at this point; use a feasibility cut")
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    return Cut(
        family=family,
        coeff_x=sp.nu.copy(),
        coeff_y=sp.eta.copy(),
        rhs=float(sp.nu @ x0 + sp.eta @ y0 - sp.objective),
        scenario=omega,
        aux=THETA,
    )


def standard_multicut(sp: SpDuals, x_star: np.ndarray, y_star: np.ndarray, omega: int) -> Cut:
    """θ_ω >= SP(x*, y*, ω) + ν (x - x*) + η (y - y*), with y* taken from the master."""
    return _optimality_multicut(CutFamily.STANDARD_MULTI, sp, x_star, y_star, omega)


def strengthened_multicut(sp: SpDuals, x_bar: np.ndarray, y_bar: np.ndarray, omega: int) -> Cut:
    """Same form as the standard multicut, generated at the windows ȳ chosen by AP(x̄)."""
    return _optimality_multicut(CutFamily.STRENGTHENED_MULTI, sp, x_bar, y_bar, omega)


def generalized_cut(ap: ApResult, x_bar: np.ndarray) -> Cut:
    """Θ >= AP(x̄) + μ (x - x̄); AP's objective already carries the scenario probabilities."""
    if not ap.feasible:
        raise InvalidCall("generalized cut requested from an infeasible AP")
    x_bar = np.asarray(x_bar, dtype=float)
    return Cut(
        family=CutFamily.GENERALIZED,
        coeff_x=ap.mu.copy(),
        coeff_y=np.zeros(len(ap.y_bar)),
        rhs=float(ap.mu @ x_bar - ap.objective),
        aux=BIG_THETA,
    )


def feasibility_cut(feas: FeasibilityResult, x_star: np.ndarray, y_star: np.ndarray, tol: float = CUT_TOL) -> Cut:
    """0 >= ε + λ (x - x̆) + β (y - y̆); violated by exactly ε at the point it was generated for."""
    if feas.epsilon_total <= tol:
        raise InvalidCall("point is recourse-feasible; no feasibility cut exists")
    return Cut(
        family=CutFamily.FEASIBILITY,
        coeff_x=feas.lam.copy(),
        coeff_y=feas.beta.copy(),
        rhs=float(feas.lam @ feas.x_fix + feas.beta @ feas.y_fix - feas.epsilon_total),
    )


def subtour_cuts(instance, x: np.ndarray) -> List[Cut]:
    """
    DFJ cuts for every connected component of an integral x that misses the depot.

    Returns:
        One cut sum_{i in S, j not in S} x_ij >= 1 per depot-free component S; empty when x
        is a single tour.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(range(instance.n + 1))
    graph.add_edges_from(a for a, v in zip(instance.arcs, x) if v > 0.5)
    cuts = []
    for component in sorted(nx.weakly_connected_components(graph), key=min):
        if 0 in component:
            continue
        coeff = np.array([-1.0 if i in component and j not in component else 0.0 for i, j in instance.arcs])
        cuts.append(Cut(CutFamily.SUBTOUR, coeff, np.zeros(2 * instance.n), -1.0))
    return cuts


def is_violated(cut: Cut, point: MasterPoint, tol: float = CUT_TOL) -> bool:
    return cut.violation(point) > tol


@dataclass
class PoolEntry:
    cut: Cut
    node: int
    violation: float


class CutPool:
    """Append-only, duplicate-suppressing collection of cuts shared by one solve."""

    def __init__(self):
        self._entries: List[PoolEntry] = []
        self._keys = set()
        self._lock = threading.Lock()

    def add(self, cut: Cut, node: int = 0, violation: float = 0.0) -> bool:
        key = cut.key()
        with self._lock:
            if key in self._keys:
                return False
            self._keys.add(key)
            self._entries.append(PoolEntry(cut, node, violation))
        logger.debug("cut %s scenario=%s node=%d violation=%.3e", cut.family.value, cut.scenario, node, violation)
        return True

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PoolEntry]:
        return iter(list(self._entries))

    def cuts(self) -> List[Cut]:
        return [entry.cut for entry in self._entries]

    def counts(self) -> Dict[str, int]:
        counts = {family.value: 0 for family in CutFamily}
        for entry in self._entries:
            counts[entry.cut.family.value] += 1
        return counts

    def write_log(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["family", "scenario", "node", "violation"])
            for entry in self._entries:
                scenario = "" if entry.cut.scenario is None else entry.cut.scenario
                writer.writerow([entry.cut.family.value, scenario, entry.node, format(entry.violation, ".17g")])
        return path
