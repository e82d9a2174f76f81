"""
Model Module

TWATSP-ST domain data: instances, scenario sets, first- and second-stage solutions,
exact evaluation of a first-stage decision, the instance and scenario generators, and
file I/O.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .config import COV, ETA, PHI, PSI, SIGMA, WORKERS
from .lp_core import INF, LpBuilder, Sense, solve_lp
from .serialization import ParseError, read_model, write_json

logger = logging.getLogger(__name__)

LAYOUTS = ("clustered_rc", "random_nw")
LAYOUT_ALIASES = {"rc": "clustered_rc", "nw": "random_nw"}
BOX = 100.0

__all__ = [
    "Instance",
    "ScenarioSet",
    "FirstStageSolution",
    "SecondStageSolution",
    "CostBreakdown",
    "ParseError",
    "evaluate",
    "cost_breakdown",
    "window_horizon",
    "generate_instance",
    "sample_scenarios",
    "read_instance",
    "write_instance",
    "read_scenarios",
    "write_scenarios",
]


@dataclass(frozen=True, eq=False)
class Instance:
    """Deterministic TWATSP data. Node 0 is the depot, customers are 1..n."""

    n: int
    coords: np.ndarray
    service: np.ndarray
    T: float
    t0: float = 0.0
    sigma: float = SIGMA
    phi: float = PHI
    psi: float = PSI
    name: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        service = np.asarray(self.service, dtype=float)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "service", service)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if coords.shape != (self.n + 1, 2):
            raise ValueError(f"coords must have shape ({self.n + 1}, 2), got {coords.shape}")
        if service.shape != (self.n + 1,):
            raise ValueError(f"service must have {self.n + 1} entries (depot first)")
        if service[0] != 0 or np.any(service < 0):
            raise ValueError("service times must be nonnegative with service[0] = 0")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if min(self.sigma, self.phi, self.psi) < 0:
            raise ValueError("weights sigma, phi, psi must be nonnegative")

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.service, other.service)
            and (self.T, self.t0, self.sigma, self.phi, self.psi)
            == (other.T, other.t0, other.sigma, other.phi, other.psi)
        )

    __hash__ = object.__hash__

    @cached_property
    def d(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))

    @cached_property
    def arcs(self) -> List[Tuple[int, int]]:
        nodes = range(self.n + 1)
        return [(i, j) for i in nodes for j in nodes if i != j]

    @cached_property
    def arc_index(self) -> Dict[Tuple[int, int], int]:
        return {a: k for k, a in enumerate(self.arcs)}

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    @cached_property
    def arc_cost(self) -> np.ndarray:
        return np.array([self.d[i, j] for i, j in self.arcs])

    def customer_service(self) -> np.ndarray:
        return self.service[1:]


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Travel-time realizations t[ω, i, j] with probabilities p[ω]."""

    times: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "probs", probs)
        if times.ndim != 3 or times.shape[1] != times.shape[2]:
            raise ValueError("times must have shape (scenarios, n+1, n+1)")
        if len(probs) != len(times):
            raise ValueError("one probability per scenario is required")
        if np.any(times < 0):
            raise ValueError("travel times must be nonnegative")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return len(self.probs)

    def __eq__(self, other):
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.probs, other.probs)

    __hash__ = object.__hash__

    @property
    def num_nodes(self) -> int:
        return self.times.shape[1]

    @cached_property
    def big_M(self) -> float:
        """Largest total travel time over all arcs among the scenarios."""
        off = ~np.eye(self.num_nodes, dtype=bool)
        return float(max(t[off].sum() for t in self.times))

    def subset(self, ids: Sequence[int], renormalize: bool = True) -> "ScenarioSet":
        probs = self.probs[list(ids)]
        if renormalize:
            probs = probs / probs.sum()
        return ScenarioSet(self.times[list(ids)], probs)

    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.times, np.transpose(self.times, (0, 2, 1))))


@dataclass(frozen=True, eq=False)
class FirstStageSolution:
    """A route through all customers plus one [ys, ye] window per customer (index i-1)."""

    route: Tuple[int, ...]
    ys: np.ndarray
    ye: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "route", tuple(int(i) for i in self.route))
        object.__setattr__(self, "ys", np.asarray(self.ys, dtype=float))
        object.__setattr__(self, "ye", np.asarray(self.ye, dtype=float))

    def validate(self, instance: Instance, tol: float = 1e-7):
        n = instance.n
        if sorted(self.route) != list(range(1, n + 1)):
            raise ValueError(f"route {self.route} is not a permutation of customers 1..{n}")
        if self.ys.shape != (n,) or self.ye.shape != (n,):
            raise ValueError("time windows need one entry per customer")
        if np.any(self.ys < -tol) or np.any(self.ye < -tol):
            raise ValueError("time windows must be nonnegative")
        short = self.ye - self.ys < instance.customer_service() - tol
        if np.any(short):
            i = int(np.flatnonzero(short)[0]) + 1
            raise ValueError(f"window of customer {i} is narrower than its service time")

    def tour_arcs(self) -> List[Tuple[int, int]]:
        nodes = (0,) + self.route + (0,)
        return list(zip(nodes[:-1], nodes[1:]))

    def x_vector(self, instance: Instance) -> np.ndarray:
        x = np.zeros(instance.num_arcs)
        for a in self.tour_arcs():
            x[instance.arc_index[a]] = 1.0
        return x

    def y_vector(self) -> np.ndarray:
        return np.concatenate([self.ys, self.ye])

    @classmethod
    def from_vectors(cls, instance: Instance, x: np.ndarray, y: np.ndarray) -> "FirstStageSolution":
        succ = {}
        for k, (i, j) in enumerate(instance.arcs):
            if x[k] > 0.5:
                succ[i] = j
        route, node = [], succ.get(0)
        while node not in (None, 0) and len(route) <= instance.n:
            route.append(node)
            node = succ.get(node)
        n = instance.n
        return cls(tuple(route), np.asarray(y[:n]), np.asarray(y[n:]))

    def distance(self, instance: Instance) -> float:
        return float(sum(instance.d[i, j] for i, j in self.tour_arcs()))

    def width_cost(self, instance: Instance) -> float:
        return float(instance.sigma * (self.ye - self.ys).sum())


@dataclass
class SecondStageSolution:
    w: np.ndarray
    e: np.ndarray
    l: np.ndarray
    o: float
    cost: float


@dataclass
class CostBreakdown:
    distance: float
    width: float
    penalty: float
    overtime: float
    expected_late_customers: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.distance + self.width + self.penalty + self.overtime


def window_horizon(instance: Instance, scenarios: ScenarioSet) -> float:
    """Latest allowed window start: the shift end or the end of the longest no-wait route, whichever is later."""
    return max(instance.T, instance.t0 + scenarios.big_M + float(instance.service.sum()))


def build_route_timing_lp(
    instance: Instance,
    times: Sequence[np.ndarray],
    probs: Sequence[float],
    route: Sequence[int],
    windows: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ys_max: float = INF,
):
    """
    Timing LP over the traveled arcs only.

    With windows given, ys/ye are constants and the LP prices each scenario's recourse.
    Without them, ys/ye become variables (width >= service, cost sigma per unit) and the
    LP optimizes the windows jointly against every scenario, each window start capped
    at ys_max.

    Returns:
        (LpProblem, index) where index holds the variable ids of ys, ye and each
        scenario's w, e, l, o block.
    """
    n = instance.n
    s = instance.service
    lp = LpBuilder()
    index: Dict[str, object] = {}
    if windows is None:
        ys = lp.add_vars(n, hi=ys_max, cost=-instance.sigma)
        ye = lp.add_vars(n, cost=instance.sigma)
        for i in range(n):
            lp.add_row({int(ye[i]): 1.0, int(ys[i]): -1.0}, Sense.GE, s[i + 1])
        index["ys"], index["ye"] = ys, ye
    nodes = (0,) + tuple(route)
    blocks = []
    for t, p in zip(times, probs):
        w = lp.add_vars(n + 1)
        lp.set_bounds(int(w[0]), instance.t0, instance.t0)
        e = lp.add_vars(n, cost=p * instance.phi)
        l = lp.add_vars(n, cost=p * instance.phi)
        o = lp.add_var(cost=p * instance.psi)
        for i, j in zip(nodes[:-1], nodes[1:]):
            lp.add_row({int(w[j]): 1.0, int(w[i]): -1.0}, Sense.GE, t[i, j] + s[j])
        for j in range(1, n + 1):
            if windows is None:
                lp.add_row({int(e[j - 1]): 1.0, int(w[j]): 1.0, int(index["ys"][j - 1]): -1.0}, Sense.GE, -s[j])
                lp.add_row({int(l[j - 1]): 1.0, int(w[j]): -1.0, int(index["ye"][j - 1]): 1.0}, Sense.GE, 0.0)
            else:
                lp.add_row({int(e[j - 1]): 1.0, int(w[j]): 1.0}, Sense.GE, windows[0][j - 1] - s[j])
                lp.add_row({int(l[j - 1]): 1.0, int(w[j]): -1.0}, Sense.GE, -windows[1][j - 1])
            lp.add_row({o: 1.0, int(w[j]): -1.0}, Sense.GE, t[j, 0] - instance.T)
        blocks.append({"w": w, "e": e, "l": l, "o": o})
    index["blocks"] = blocks
    return lp.build(), index


def _scenario_recourse(instance: Instance, t: np.ndarray, first_stage: FirstStageSolution) -> SecondStageSolution:
    problem, index = build_route_timing_lp(
        instance, [t], [1.0], first_stage.route, (first_stage.ys, first_stage.ye)
    )
    outcome = solve_lp(problem)
    if not outcome.is_optimal:
        raise RuntimeError(f"recourse LP unexpectedly {outcome.status.value}")
    b = index["blocks"][0]
    x = outcome.primal
    return SecondStageSolution(
        w=x[b["w"]].copy(),
        e=x[b["e"]].copy(),
        l=x[b["l"]].copy(),
        o=float(x[b["o"]]),
        cost=float(outcome.objective_value),
    )


def evaluate(
    instance: Instance,
    scenarios: ScenarioSet,
    first_stage: FirstStageSolution,
    workers: int = WORKERS,
) -> Tuple[float, List[SecondStageSolution]]:
    """
    Exact expected cost of a first-stage decision.

    Args:
        instance: Problem data
        scenarios: Travel-time scenarios
        first_stage: Route and time windows to evaluate
        workers: Parallel recourse LPs (default: 1)

    Returns:
        (distance + width cost + expected recourse, per-scenario second-stage solutions)
    """
    first_stage.validate(instance)

    def run(t):
        return _scenario_recourse(instance, t, first_stage)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            second = list(executor.map(run, scenarios.times))
    else:
        second = [run(t) for t in scenarios.times]
    recourse = float(sum(p * sol.cost for p, sol in zip(scenarios.probs, second)))
    total = first_stage.distance(instance) + first_stage.width_cost(instance) + recourse
    return total, second


def cost_breakdown(instance: Instance, scenarios: ScenarioSet, first_stage: FirstStageSolution) -> CostBreakdown:
    _, second = evaluate(instance, scenarios, first_stage)
    p = scenarios.probs
    return CostBreakdown(
        distance=first_stage.distance(instance),
        width=first_stage.width_cost(instance),
        penalty=float(sum(pw * instance.phi * (sol.e.sum() + sol.l.sum()) for pw, sol in zip(p, second))),
        overtime=float(sum(pw * instance.psi * sol.o for pw, sol in zip(p, second))),
        expected_late_customers=float(sum(pw * np.count_nonzero(sol.l > 1e-9) for pw, sol in zip(p, second))),
    )


def _nearest_neighbor_length(d: np.ndarray) -> float:
    n = len(d)
    unvisited = set(range(1, n))
    node, length = 0, 0.0
    while unvisited:
        nxt = min(unvisited, key=lambda j: (d[node, j], j))
        length += d[node, nxt]
        unvisited.remove(nxt)
        node = nxt
    return length + d[node, 0]


def generate_instance(
    layout: str,
    n: int,
    seed: int,
    t0: float = 0.0,
    sigma: float = SIGMA,
    phi: float = PHI,
    psi: float = PSI,
) -> Instance:
    """
    Draw a desk-scale instance.

    Layouts place the depot at the center of the [0, 100]^2 box:
        clustered_rc: 3 to 5 Gaussian clusters (std 8) clipped to the box, service time 10
        random_nw: customers uniform over the box, service times uniform integers in [5, 20]

    The shift length is T = t0 + 1.4 * (nearest-neighbor tour length + total service time).
    """
    layout = LAYOUT_ALIASES.get(layout, layout)
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout '{layout}', expected one of {LAYOUTS}")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    coords = np.empty((n + 1, 2))
    coords[0] = (BOX / 2, BOX / 2)
    service = np.zeros(n + 1)
    if layout == "random_nw":
        coords[1:] = rng.uniform(0.0, BOX, size=(n, 2))
        service[1:] = rng.integers(5, 21, size=n)
    else:
        k = int(rng.integers(3, 6))
        centers = rng.uniform(0.15 * BOX, 0.85 * BOX, size=(k, 2))
        member = rng.integers(0, k, size=n)
        coords[1:] = np.clip(centers[member] + rng.normal(0.0, 8.0, size=(n, 2)), 0.0, BOX)
        service[1:] = 10.0
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    T = t0 + 1.4 * (_nearest_neighbor_length(d) + service.sum())
    return Instance(
        n=n,
        coords=coords,
        service=service,
        T=float(T),
        t0=t0,
        sigma=sigma,
        phi=phi,
        psi=psi,
        name=f"{layout}_n{n}_s{seed}",
    )


def sample_scenarios(
    instance: Instance,
    count: int,
    cov: float = COV,
    eta: float = ETA,
    seed: int = 0,
    symmetric: bool = False,
) -> ScenarioSet:
    """
    Sample travel times t_ij = d_ij + delta_ij with delta ~ Gamma(k = 1/cov^2, scale = eta * d_ij * cov^2).

    Each scenario draws from its own child stream of SeedSequence(seed), filling the full
    (n+1) x (n+1) matrix row-major. With symmetric=True the upper triangle is mirrored.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if cov <= 0:
        raise ValueError("cov must be positive")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    d = instance.d
    shape = 1.0 / cov**2
    scale = eta * d * cov**2
    times = np.empty((count,) + d.shape)
    for w, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.Generator(np.random.PCG64(child))
        delta = rng.gamma(shape, 1.0, size=d.shape) * scale
        if symmetric:
            upper = np.triu(delta, 1)
            delta = upper + upper.T
        t = d + delta
        np.fill_diagonal(t, 0.0)
        times[w] = t
    return ScenarioSet(times, np.full(count, 1.0 / count))


class InstanceFile(BaseModel):
    n: int = Field(ge=1)
    coords: List[Tuple[float, float]]
    service: List[float]
    T: float = Field(gt=0)
    t0: float = 0.0
    sigma: float = Field(default=SIGMA, ge=0)
    phi: float = Field(default=PHI, ge=0)
    psi: float = Field(default=PSI, ge=0)
    name: str = ""

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.coords) != self.n + 1:
            raise ValueError(f"coords must list {self.n + 1} nodes (depot first)")
        if len(self.service) != self.n + 1:
            raise ValueError(f"service must list {self.n + 1} values (depot first)")
        return self


class ScenarioFile(BaseModel):
    probs: List[float] = Field(min_length=1)
    scenarios: List[List[float]] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_shapes(self):
        if len(self.probs) != len(self.scenarios):
            raise ValueError("one probability per scenario is required")
        size = len(self.scenarios[0])
        side = int(round(size**0.5))
        if side * side != size or any(len(s) != size for s in self.scenarios):
            raise ValueError("each scenario must be a square row-major matrix of equal size")
        return self


def write_instance(instance: Instance, path):
    return write_json(
        path,
        {
            "name": instance.name,
            "n": instance.n,
            "coords": instance.coords.tolist(),
            "service": instance.service.tolist(),
            "T": instance.T,
            "t0": instance.t0,
            "sigma": instance.sigma,
            "phi": instance.phi,
            "psi": instance.psi,
        },
    )


def read_instance(path) -> Instance:
    data = read_model(path, InstanceFile)
    try:
        return Instance(
            n=data.n,
            coords=np.array(data.coords),
            service=np.array(data.service),
            T=data.T,
            t0=data.t0,
            sigma=data.sigma,
            phi=data.phi,
            psi=data.psi,
            name=data.name,
        )
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e


def write_scenarios(scenarios: ScenarioSet, path):
    return write_json(
        path,
        {
            "probs": scenarios.probs.tolist(),
            "scenarios": [t.ravel().tolist() for t in scenarios.times],
        },
    )


def read_scenarios(path) -> ScenarioSet:
    data = read_model(path, ScenarioFile)
    side = int(round(len(data.scenarios[0]) ** 0.5))
    try:
        return ScenarioSet(np.array(data.scenarios).reshape(-1, side, side), np.array(data.probs))
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from e
