"""
Scenario Selection Module

Chooses which scenarios are embedded directly in the master problem: actual scenarios
picked by clustering an opportunity-cost matrix (or uniformly at random), plus artificial
scenarios built as random convex combinations of the scenarios left to the subproblems.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .config import (
    CLUSTER_RESTARTS,
    EXACT_PARTITION_LIMIT,
    FRAC_ACTUAL,
    FRAC_ARTIFICIAL,
    V_ROW_NODE_LIMIT,
    V_ROW_TIME_LIMIT,
    WORKERS,
)
from .model import FirstStageSolution, Instance, ScenarioSet
from .second_stage import solve_sp
from .serialization import read_model, write_json

logger = logging.getLogger(__name__)

MODES = ("none", "random", "clustered")


class BudgetExceeded(RuntimeError):
    """Raised when a one-scenario solve ends without any feasible route."""


@dataclass(frozen=True, eq=False)
class ArtificialScenario:
    """Convex combination sum_k alpha[k] * t[support[k]] of subproblem scenarios."""

    support: Tuple[int, ...]
    alpha: np.ndarray
    times: np.ndarray

    def linkage(self) -> Dict[int, float]:
        return {int(w): float(a) for w, a in zip(self.support, self.alpha)}


@dataclass
class OpportunityCosts:
    v: np.ndarray
    solutions: List[FirstStageSolution]
    flagged: List[int] = field(default_factory=list)


@dataclass
class RetentionPlan:
    num_scenarios: int
    omega_mp1: List[int]
    omega_mp2: List[ArtificialScenario]
    omega_sp: List[int]
    mode: str = "none"
    clusters: List[List[int]] = field(default_factory=list)
    representatives: List[int] = field(default_factory=list)
    v_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if sorted(self.omega_mp1 + self.omega_sp) != list(range(self.num_scenarios)):
            raise ValueError("retained and subproblem scenarios must partition the scenario set")
        for art in self.omega_mp2:
            if np.any(art.alpha < 0) or abs(art.alpha.sum() - 1.0) > 1e-9:
                raise ValueError("artificial weights must be nonnegative and sum to 1")
        for cluster, rep in zip(self.clusters, self.representatives):
            if rep not in cluster:
                raise ValueError(f"representative {rep} is not in its cluster")

    @classmethod
    def empty(cls, num_scenarios: int) -> "RetentionPlan":
        return cls(num_scenarios, [], [], list(range(num_scenarios)))

    def summary(self) -> Dict[str, int]:
        return {"retained": len(self.omega_mp1), "artificial": len(self.omega_mp2), "subproblem": len(self.omega_sp)}

    def to_dump(self) -> Dict[str, object]:
        return {
            "clusters": self.clusters,
            "representatives": self.representatives,
            "alphas": [{"support": list(a.support), "alpha": a.alpha} for a in self.omega_mp2],
            "v_matrix": [] if self.v_matrix is None else self.v_matrix,
        }


class ArtificialDump(BaseModel):
    support: List[int]
    alpha: List[float]


class PlanDump(BaseModel):
    clusters: List[List[int]]
    representatives: List[int]
    alphas: List[ArtificialDump]
    v_matrix: List[List[float]]


def write_plan(plan: RetentionPlan, path):
    return write_json(path, plan.to_dump())


def read_plan(path) -> PlanDump:
    return read_model(path, PlanDump)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5 + 1e-9))


def opportunity_cost_matrix(
    instance: Instance,
    scenarios: ScenarioSet,
    node_limit: int = V_ROW_NODE_LIMIT,
    time_limit: float = V_ROW_TIME_LIMIT,
    workers: int = WORKERS,
) -> OpportunityCosts:
    """
    V[i, j] = recourse cost under scenario j of the solution that is optimal for scenario i alone.

    Each row solves the one-scenario problem by branch and cut within the node/time budget.
    Rows whose solve stopped on a limit keep the best route found and are listed in flagged.

    Raises:
        BudgetExceeded: If a row's budget ran out before any route was found.
    """
    from .master_bnc import VariantConfig, solve

    if len(scenarios) == 0:
        raise ValueError("opportunity costs need at least one scenario")
    config = VariantConfig(two_step=True, retention_mode="none", time_limit=time_limit, node_limit=node_limit)

    def row(i: int):
        report = solve(instance, scenarios.subset([i]), config)
        if report.incumbent is None:
            raise BudgetExceeded(f"scenario {i}: no route found within {node_limit} nodes / {time_limit} s")
        fs = report.incumbent
        x, y = fs.x_vector(instance), fs.y_vector()
        sps = [solve_sp(instance, scenarios, j, x, y) for j in range(len(scenarios))]
        if not all(sp.feasible for sp in sps):
            raise RuntimeError(f"scenario {i}: route {fs.route} has no recourse in some scenario")
        values = [sp.objective for sp in sps]
        return values, fs, report.status != "Optimal"

    ids = range(len(scenarios))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(row, ids))
    else:
        rows = [row(i) for i in ids]
    flagged = [i for i, r in zip(ids, rows) if r[2]]
    if flagged:
        logger.warning("opportunity-cost rows %s stopped on a limit", flagged)
    return OpportunityCosts(np.array([r[0] for r in rows]), [r[1] for r in rows], flagged)


def _cluster_error(v: np.ndarray, weights: np.ndarray, cluster: Sequence[int], rep: int) -> float:
    w = weights[list(cluster)]
    mean = float(w @ v[rep, list(cluster)]) / float(w.sum())
    return float(w.sum()) * abs(v[rep, rep] - mean)


def best_representative(v: np.ndarray, weights: np.ndarray, cluster: Sequence[int]) -> Tuple[int, float]:
    """Member minimizing the cluster's fit error; ties go to the lowest id."""
    best = None
    for r in sorted(cluster):
        err = _cluster_error(v, weights, cluster, r)
        if best is None or err < best[1] - 1e-12:
            best = (r, err)
    return best


def total_error(v: np.ndarray, clusters: Sequence[Sequence[int]], probs: Optional[np.ndarray] = None) -> float:
    weights = _weights(len(v), probs)
    return sum(best_representative(v, weights, c)[1] for c in clusters)


def _weights(n: int, probs) -> np.ndarray:
    if probs is None:
        return np.full(n, 1.0 / n)
    return np.asarray(probs, dtype=float)


def stirling2(n: int, k: int) -> int:
    table = [[0] * (k + 1) for _ in range(n + 1)]
    table[0][0] = 1
    for i in range(1, n + 1):
        for j in range(1, min(i, k) + 1):
            table[i][j] = j * table[i - 1][j] + table[i - 1][j - 1]
    return table[n][k]


def set_partitions(n: int, k: int):
    """All partitions of range(n) into exactly k blocks, via restricted growth strings."""

    def grow(prefix: List[int], used: int):
        i = len(prefix)
        if i == n:
            if used == k:
                yield prefix
            return
        if k - used > n - i:
            return
        for b in range(min(used + 1, k)):
            yield from grow(prefix + [b], max(used, b + 1))

    for labels in grow([], 0):
        blocks = [[] for _ in range(k)]
        for item, b in enumerate(labels):
            blocks[b].append(item)
        yield blocks


def _exact_clusters(v, weights, k):
    best = None
    for blocks in set_partitions(len(v), k):
        err = sum(best_representative(v, weights, c)[1] for c in blocks)
        if best is None or err < best[0] - 1e-12:
            best = (err, blocks)
    return best[1]


def _assign(v, reps: List[int]) -> List[List[int]]:
    clusters = [[r] for r in reps]
    rep_set = set(reps)
    for j in range(len(v)):
        if j in rep_set:
            continue
        k = min(range(len(reps)), key=lambda c: (abs(v[reps[c], j] - v[reps[c], reps[c]]), c))
        clusters[k].append(j)
    return clusters


def _descend(v, weights, clusters: List[List[int]]) -> List[List[int]]:
    errors = [best_representative(v, weights, c)[1] for c in clusters]
    improved = True
    while improved:
        improved = False
        for a in range(len(clusters)):
            for j in sorted(clusters[a]):
                if len(clusters[a]) == 1:
                    break
                for b in range(len(clusters)):
                    if b == a:
                        continue
                    src = [i for i in clusters[a] if i != j]
                    dst = sorted(clusters[b] + [j])
                    e_src = best_representative(v, weights, src)[1]
                    e_dst = best_representative(v, weights, dst)[1]
                    if e_src + e_dst < errors[a] + errors[b] - 1e-12:
                        clusters[a], clusters[b] = src, dst
                        errors[a], errors[b] = e_src, e_dst
                        improved = True
                        break
    return clusters


def _kmedoids(v, weights, k, rng) -> List[List[int]]:
    n = len(v)
    reps = [int(rng.integers(n))]
    while len(reps) < k:
        dist = np.array([min(np.linalg.norm(v[j] - v[r]) for r in reps) for j in range(n)])
        dist[reps] = -1.0
        reps.append(int(np.argmax(dist)))
    for _ in range(100):
        clusters = _assign(v, reps)
        new_reps = [best_representative(v, weights, c)[0] for c in clusters]
        if new_reps == reps:
            break
        reps = new_reps
    return _descend(v, weights, _assign(v, reps))


def cluster_and_select(
    v: np.ndarray,
    k: int,
    probs: Optional[Sequence[float]] = None,
    seed=0,
    restarts: int = CLUSTER_RESTARTS,
    exact_limit: int = EXACT_PARTITION_LIMIT,
) -> Tuple[List[List[int]], List[int]]:
    """
    Partition the scenarios into k clusters and pick one representative per cluster.

    A cluster C with representative r costs P(C) * |V[r, r] - E_C[V[r, j]]|, P(C) being the
    cluster's probability and E_C the probability-weighted mean over C (uniform by default).
    Small cases are enumerated exactly; otherwise farthest-point seeded k-medoids restarts
    are followed by single-element reassignment descent.

    Returns:
        (clusters, representatives), each cluster sorted, clusters ordered by smallest member
    """
    v = np.asarray(v, dtype=float)
    n = len(v)
    if not 1 <= k <= n:
        raise ValueError(f"cluster count {k} must lie in [1, {n}]")
    weights = _weights(n, probs)
    if stirling2(n, k) <= exact_limit:
        clusters = _exact_clusters(v, weights, k)
    else:
        best = None
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        for child in root.spawn(restarts):
            rng = np.random.Generator(np.random.PCG64(child))
            candidate = _kmedoids(v, weights, k, rng)
            err = sum(best_representative(v, weights, c)[1] for c in candidate)
            if best is None or err < best[0] - 1e-12:
                best = (err, candidate)
        clusters = best[1]
    clusters = sorted((sorted(c) for c in clusters), key=min)
    reps = [best_representative(v, weights, c)[0] for c in clusters]
    return clusters, reps


def make_artificial(scenarios: ScenarioSet, omega_sp: Sequence[int], count: int, seed=0) -> List[ArtificialScenario]:
    """Random convex combinations of the listed scenarios; alpha is uniform(0, 1) normalized."""
    if count > 0 and len(omega_sp) == 0:
        raise ValueError("artificial scenarios need a nonempty subproblem set")
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    support = tuple(int(w) for w in omega_sp)
    stack = scenarios.times[list(support)]
    out = []
    for _ in range(count):
        alpha = rng.uniform(0.0, 1.0, len(support))
        alpha /= alpha.sum()
        out.append(ArtificialScenario(support, alpha, np.tensordot(alpha, stack, axes=1)))
    return out


def build_plan(
    instance: Instance,
    scenarios: ScenarioSet,
    frac_actual: float = FRAC_ACTUAL,
    frac_artificial: float = FRAC_ARTIFICIAL,
    mode: str = "clustered",
    seed: int = 0,
    v_matrix: Optional[np.ndarray] = None,
    workers: int = WORKERS,
) -> RetentionPlan:
    """
    Decide the retained, artificial and subproblem scenario sets.

    Args:
        instance: Problem data
        scenarios: Full scenario set
        frac_actual: Share of scenarios retained in the master (default: 0.10)
        frac_artificial: Share of artificial scenarios, relative to the full set (default: 0.05)
        mode: none, random or clustered (default: clustered)
        seed: Root of the selection, artificial-weight and clustering streams (default: 0)
        v_matrix: Precomputed opportunity costs; computed on demand in clustered mode

    Returns:
        RetentionPlan
    """
    if mode not in MODES:
        raise ValueError(f"unknown retention mode '{mode}'")
    for name, frac in (("frac_actual", frac_actual), ("frac_artificial", frac_artificial)):
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {frac}")
    n_scen = len(scenarios)
    if mode == "none":
        return RetentionPlan.empty(n_scen)

    select_seq, artificial_seq, cluster_seq = np.random.SeedSequence(seed).spawn(3)
    k = min(round_half_up(frac_actual * n_scen), n_scen)
    clusters: List[List[int]] = []
    reps: List[int] = []
    if k == 0:
        retained: List[int] = []
    elif mode == "random":
        rng = np.random.Generator(np.random.PCG64(select_seq))
        retained = sorted(int(w) for w in rng.choice(n_scen, size=k, replace=False))
    else:
        if v_matrix is None:
            v_matrix = opportunity_cost_matrix(instance, scenarios, workers=workers).v
        clusters, reps = cluster_and_select(v_matrix, k, scenarios.probs, seed=cluster_seq)
        retained = sorted(reps)
    omega_sp = [w for w in range(n_scen) if w not in set(retained)]
    count = round_half_up(frac_artificial * n_scen) if omega_sp else 0
    artificial = make_artificial(scenarios, omega_sp, count, seed=artificial_seq)
    logger.info("retention plan (%s): %d retained, %d artificial, %d in subproblems", mode, len(retained), count, len(omega_sp))
    return RetentionPlan(
        num_scenarios=n_scen,
        omega_mp1=retained,
        omega_mp2=artificial,
        omega_sp=omega_sp,
        mode=mode,
        clusters=clusters,
        representatives=reps,
        v_matrix=None if v_matrix is None else np.asarray(v_matrix),
    )
