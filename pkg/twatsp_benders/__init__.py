"""
TWATSP-ST Two-Step Benders Package

Solves the time window assignment traveling salesperson problem with stochastic travel
times:
1. A route and one time window per customer are fixed before travel times are known
2. Earliness, lateness and overtime are paid per scenario afterwards
3. A branch-and-cut master is separated with generalized and strengthened multicuts
4. Representative and artificial scenarios can be retained inside the master

Small instances can be checked against exhaustive enumeration (see `oracle`).
"""

from .master_bnc import SolveReport, VariantConfig, solve
from .model import FirstStageSolution, Instance, ScenarioSet, evaluate

__all__ = ["solve", "SolveReport", "VariantConfig", "Instance", "ScenarioSet", "FirstStageSolution", "evaluate"]
