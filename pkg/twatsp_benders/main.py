"""
Main Orchestration Module

Command-line surface: instance generation, single solves and the variant benchmark.
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from .config import COV, ETA, FRAC_ACTUAL, FRAC_ARTIFICIAL, GAP_TOL, LOG_LEVEL, NODE_LIMIT, TIME_LIMIT, WORKERS
from .cuts import CutFamily
from .generic import CutMode, solve_generic, toy_problem
from .lp_core import NumericalBreakdown
from .master_bnc import VARIANTS, SolveReport, VariantConfig, read_report, solve, write_report
from .model import generate_instance, read_instance, read_scenarios, sample_scenarios, write_instance, write_scenarios
from .scenario_selection import BudgetExceeded, build_plan, write_plan
from .serialization import ParseError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_LIMIT = 2
EXIT_USAGE = 64

PROFILES = {
    "desk": {"sizes": [5, 6, 7], "scenario_counts": [10, 20], "time_limit": 120.0},
    "full": {"sizes": [25], "scenario_counts": [100], "time_limit": 3 * 3600.0},
}
PROFILES["paper"] = PROFILES["full"]

FAMILY_COLUMNS = {
    CutFamily.GENERALIZED.value: "Generalized cuts",
    CutFamily.STRENGTHENED_MULTI.value: "Strengthened multicuts",
    CutFamily.STANDARD_MULTI.value: "Standard multicuts",
    CutFamily.FEASIBILITY.value: "Feasibility cuts",
    CutFamily.SUBTOUR.value: "Subtour cuts",
}


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the conventional usage status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _banner(title: str):
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


def run_generate(
    layout: str = "nw",
    n: int = 5,
    scenarios: int = 10,
    seed: int = 0,
    cov: float = COV,
    eta: float = ETA,
    symmetric: bool = False,
    output_dir: str = "instances",
) -> Dict[str, str]:
    """
    Generate an instance and its scenario set and write both files.

    Args:
        layout: rc / clustered_rc or nw / random_nw (default: nw)
        n: Number of customers (default: 5)
        scenarios: Number of travel-time scenarios (default: 10)
        seed: Seed for coordinates and scenario streams (default: 0)
        cov: Coefficient of variation of the disruption (default: 0.25)
        eta: Mean disruption relative to distance (default: 0.35)
        symmetric: Mirror disruptions so t_ij = t_ji (default: False)
        output_dir: Directory for the two files (default: instances)

    Returns:
        Dictionary with the instance and scenario paths
    """
    instance = generate_instance(layout, n, seed)
    scenario_set = sample_scenarios(instance, scenarios, cov=cov, eta=eta, seed=seed, symmetric=symmetric)
    out = Path(output_dir)
    instance_path = write_instance(instance, out / f"{instance.name}.json")
    scenario_path = write_scenarios(scenario_set, out / f"{instance.name}_w{scenarios}_scenarios.json")
    return {"instance": str(instance_path), "scenarios": str(scenario_path)}


def _print_report(report: SolveReport):
    print(f"Variant:        {report.variant}")
    print(f"Status:         {report.status}")
    print(f"Objective:      {report.upper_bound:.6f}")
    print(f"Lower bound:    {report.lower_bound:.6f}  (gap {report.gap_pct:.4f}%)")
    print(f"Root bound:     {report.root_lower_bound:.6f}  (root gap {report.root_gap_pct:.4f}%)")
    print(f"Nodes:          {report.nodes_explored} explored, {report.nodes_open} open")
    for family, column in FAMILY_COLUMNS.items():
        print(f"{column + ':':<24}{report.cut_counts[family]}")
    if report.incumbent is not None:
        print(f"Route:          0 -> {' -> '.join(str(i) for i in report.incumbent.route)} -> 0")
        for i, (s, e) in enumerate(zip(report.incumbent.ys, report.incumbent.ye), start=1):
            print(f"  customer {i:>2}: [{s:9.3f}, {e:9.3f}]")
    if report.breakdown:
        b = report.breakdown
        print(
            f"Cost:           distance {b['distance']:.3f} + width {b['width']:.3f} + "
            f"penalty {b['penalty']:.3f} + overtime {b['overtime']:.3f}"
        )


def run_toy(variant: str) -> int:
    mode = CutMode.TWO_STEP if VARIANTS[variant][0] else CutMode.STANDARD
    report = solve_generic(toy_problem(), cut_mode=mode)
    _banner(f"WORKED EXAMPLE ({mode.value})")
    print(f"Objective:       {report.objective:.6f}")
    print(f"x = {report.x.tolist()}, y = {report.y.tolist()}, z = {[z.tolist() for z in report.z]}")
    print(f"Optimality cuts: {report.optimality_cuts}")
    for it in report.iterations:
        print(
            f"  iter {it.index}: x={it.point.x.tolist()} y={np.round(it.point.y, 6).tolist()} "
            f"LB={it.lower_bound:.6f} UB={it.upper_bound:.6f} cuts={[c.family.value for c in it.cuts]}"
        )
    return EXIT_OK if report.status == "Optimal" else EXIT_LIMIT


def run_solve(
    instance_path: str,
    scenarios_path: str,
    config: VariantConfig,
    output: Optional[str] = None,
    plan_dump: Optional[str] = None,
    timing: bool = True,
) -> SolveReport:
    """Solve one instance with one variant; optionally write the report and the retention plan."""
    instance = read_instance(instance_path)
    scenario_set = read_scenarios(scenarios_path)
    plan = build_plan(
        instance,
        scenario_set,
        config.frac_actual,
        config.frac_artificial,
        mode=config.retention_mode,
        seed=config.seed,
        workers=config.workers,
    )
    if plan_dump:
        write_plan(plan, plan_dump)
    report = solve(instance, scenario_set, config, plan=plan)
    if output:
        write_report(report, output, timing=timing)
    return report


def _status_code(status: str) -> int:
    return EXIT_OK if status == "Optimal" else EXIT_LIMIT


def run_bench(
    variants: Sequence[str],
    sizes: Sequence[int],
    scenario_counts: Sequence[int],
    seeds: Sequence[int],
    layout: str = "nw",
    time_limit: float = TIME_LIMIT,
    node_limit: int = NODE_LIMIT,
    workers: int = WORKERS,
    output_dir: str = "bench",
    timing: bool = True,
) -> pd.DataFrame:
    """
    Run every variant on every generated instance and write per-run reports plus summaries.

    Outputs under output_dir: runs/<instance>_w<scenarios>_<variant>.json, runs.csv (one row
    per run), summary.csv and summary.md. Every table is computed from the run files alone.

    Returns:
        The aggregate table, one row per (n, scenarios, variant)
    """
    out = Path(output_dir)
    runs_dir = out / "runs"
    jobs = []
    for n in sizes:
        for count in scenario_counts:
            for seed in seeds:
                instance = generate_instance(layout, n, seed)
                scenario_set = sample_scenarios(instance, count, seed=seed)
                for variant in variants:
                    config = VariantConfig.for_variant(variant, seed=seed, time_limit=time_limit, node_limit=node_limit)
                    jobs.append((instance, scenario_set, config, runs_dir / f"{instance.name}_w{count}_{variant}.json"))

    def run(job):
        instance, scenario_set, config, path = job
        report = solve(instance, scenario_set, config)
        write_report(report, path, timing=timing)
        return path

    paths: List[Path] = []
    with tqdm(total=len(jobs), desc="bench", unit="run") as bar:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                for path in executor.map(run, jobs):
                    paths.append(path)
                    bar.update(1)
        else:
            for job in jobs:
                paths.append(run(job))
                bar.update(1)

    runs = _runs_frame(paths)
    if not timing:
        runs = runs.drop(columns="minutes")
    runs.to_csv(out / "runs.csv", index=False, float_format="%.10g")
    table = summarize_runs(paths, timing=timing)
    table.to_csv(out / "summary.csv", index=False, float_format="%.10g")
    (out / "summary.md").write_text(table.to_markdown(index=False, floatfmt=".4f") + "\n")
    return table


def _runs_frame(paths: Sequence[Path]) -> pd.DataFrame:
    rows = []
    for path in paths:
        rep = read_report(path)
        row = {
            "instance": rep.instance,
            "n": rep.n,
            "scenarios": rep.scenarios,
            "variant": rep.variant,
            "solved": rep.status == "Optimal",
            "gap_pct": rep.gap_pct,
            "lower_bound": rep.lower_bound,
            "upper_bound": rep.upper_bound,
            "root_gap_pct": rep.root_gap_pct,
            "nodes": rep.nodes_explored,
            "iterations": rep.iterations,
            "minutes": None if rep.wall_ms is None else rep.wall_ms / 60000.0,
        }
        for family, column in FAMILY_COLUMNS.items():
            row[column] = rep.cut_counts.get(family, 0)
        rows.append(row)
    return pd.DataFrame(rows)


def summarize_runs(paths: Sequence[Path], timing: bool = True) -> pd.DataFrame:
    """Per-size aggregates in the reporting schema of the benchmark tables."""
    runs = _runs_frame(paths)
    order = {name: k for k, name in enumerate(VARIANTS)}
    records = []
    for (n, count, variant), group in runs.groupby(["n", "scenarios", "variant"], sort=False):
        solved = group[group["solved"]]
        unsolved = group[~group["solved"]]
        record = {
            "n": int(n),
            "scenarios": int(count),
            "variant": variant,
            "# Solved": int(len(solved)),
        }
        if timing:
            record["Time to opt. (min.)"] = solved["minutes"].mean() if len(solved) else float("nan")
        record["Optimality gap"] = unsolved["gap_pct"].mean() if len(unsolved) else 0.0
        record["Lower Bound"] = group["lower_bound"].mean()
        record["Upper Bound"] = group["upper_bound"].mean()
        record["Root Node Gap (%)"] = group["root_gap_pct"].mean()
        for column in FAMILY_COLUMNS.values():
            record[column] = group[column].mean()
        record["Nodes"] = group["nodes"].mean()
        record["Iterations"] = group["iterations"].mean()
        records.append(record)
    table = pd.DataFrame(records)
    if len(table):
        table["_order"] = table["variant"].map(order)
        table = table.sort_values(["n", "scenarios", "_order"], kind="stable").drop(columns="_order")
        table = table.reset_index(drop=True)
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(description="Two-step Benders branch-and-cut for the TWATSP with stochastic travel times")
    parser.add_argument("--log-level", default=LOG_LEVEL, help=f"Logging level (default: {LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate an instance and its scenarios")
    gen.add_argument("--layout", default="nw", choices=["rc", "nw", "clustered_rc", "random_nw"], help="Customer layout (default: nw)")
    gen.add_argument("--n", type=int, default=5, help="Number of customers (default: 5)")
    gen.add_argument("--scenarios", type=int, default=10, help="Number of scenarios (default: 10)")
    gen.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    gen.add_argument("--cov", type=float, default=COV, help=f"Disruption coefficient of variation (default: {COV})")
    gen.add_argument("--eta", type=float, default=ETA, help=f"Mean disruption per unit distance (default: {ETA})")
    gen.add_argument("--symmetric", action="store_true", help="Mirror disruptions so travel times are symmetric")
    gen.add_argument("--output-dir", default="instances", help="Output directory (default: instances)")

    sol = sub.add_parser("solve", help="Solve one instance with one variant")
    sol.add_argument("--instance", help="Instance JSON file")
    sol.add_argument("--scenarios", help="Scenario JSON file")
    sol.add_argument("--toy", action="store_true", help="Solve the one-scenario worked example instead")
    sol.add_argument("--variant", default="tbds", choices=list(VARIANTS), help="Method variant (default: tbds)")
    sol.add_argument("--time-limit", type=float, default=TIME_LIMIT, help=f"Seconds (default: {TIME_LIMIT:g})")
    sol.add_argument("--node-limit", type=int, default=NODE_LIMIT, help=f"Branch-and-bound nodes (default: {NODE_LIMIT})")
    sol.add_argument("--gap", type=float, default=GAP_TOL, help=f"Relative optimality gap (default: {GAP_TOL:g})")
    sol.add_argument("--seed", type=int, default=0, help="Seed for scenario retention (default: 0)")
    sol.add_argument("--frac-actual", type=float, default=FRAC_ACTUAL, help=f"Share of retained scenarios (default: {FRAC_ACTUAL})")
    sol.add_argument("--frac-artificial", type=float, default=FRAC_ARTIFICIAL, help=f"Share of artificial scenarios (default: {FRAC_ARTIFICIAL})")
    sol.add_argument("--ap-scope", default="sp_only", choices=["sp_only", "all"], help="Scenarios in the aggregated subproblem (default: sp_only)")
    sol.add_argument("--fractional-cuts", type=int, default=0, help="Cut rounds at non-root fractional nodes (default: 0)")
    sol.add_argument("--workers", type=int, default=WORKERS, help=f"Parallel subproblem solves (default: {WORKERS})")
    sol.add_argument("--output", help="Write the SolveReport JSON here")
    sol.add_argument("--cut-log", help="Write a CSV log of every cut added")
    sol.add_argument("--plan-dump", help="Write the retention plan JSON here")
    sol.add_argument("--no-timing", action="store_true", help="Omit wall-clock fields from the report")

    bench = sub.add_parser("bench", help="Run the variant benchmark")
    bench.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=list(VARIANTS), help="Variants to run (default: all six)")
    bench.add_argument("--profile", default="desk", choices=list(PROFILES), help="Size profile (default: desk)")
    bench.add_argument("--sizes", type=int, nargs="+", help="Customer counts (overrides the profile)")
    bench.add_argument("--scenario-counts", type=int, nargs="+", help="Scenario counts (overrides the profile)")
    bench.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2], help="Instance seeds (default: 0 1 2)")
    bench.add_argument("--layout", default="nw", choices=["rc", "nw", "clustered_rc", "random_nw"], help="Customer layout (default: nw)")
    bench.add_argument("--time-limit", type=float, help="Seconds per run (overrides the profile)")
    bench.add_argument("--node-limit", type=int, default=NODE_LIMIT, help=f"Nodes per run (default: {NODE_LIMIT})")
    bench.add_argument("--workers", type=int, default=WORKERS, help=f"Parallel runs (default: {WORKERS})")
    bench.add_argument("--output-dir", default="bench", help="Output directory (default: bench)")
    bench.add_argument("--no-timing", action="store_true", help="Omit wall-clock columns so outputs are byte-stable")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")

    if args.command == "generate":
        try:
            paths = run_generate(
                layout=args.layout,
                n=args.n,
                scenarios=args.scenarios,
                seed=args.seed,
                cov=args.cov,
                eta=args.eta,
                symmetric=args.symmetric,
                output_dir=args.output_dir,
            )
        except (ValueError, OSError) as e:
            print(f"❌ Generation failed: {e}")
            return EXIT_FAILURE
        _banner("✓ INSTANCE GENERATED")
        print(f"Instance:  {paths['instance']}")
        print(f"Scenarios: {paths['scenarios']}")
        return EXIT_OK

    if args.command == "solve":
        if args.toy:
            return run_toy(args.variant)
        if not args.instance or not args.scenarios:
            parser.error("--instance and --scenarios are required unless --toy is given")
        try:
            config = VariantConfig.for_variant(
                args.variant,
                seed=args.seed,
                time_limit=args.time_limit,
                node_limit=args.node_limit,
                gap_tol=args.gap,
                frac_actual=args.frac_actual,
                frac_artificial=args.frac_artificial,
                ap_scope=args.ap_scope,
                fractional_cuts=args.fractional_cuts,
                workers=args.workers,
                cut_log=args.cut_log,
            )
        except ValueError as e:
            parser.error(str(e))
        try:
            report = run_solve(
                args.instance,
                args.scenarios,
                config,
                output=args.output,
                plan_dump=args.plan_dump,
                timing=not args.no_timing,
            )
        except ParseError as e:
            print(f"❌ Could not read input: {e}")
            return EXIT_FAILURE
        except (NumericalBreakdown, BudgetExceeded, RuntimeError, ValueError) as e:
            print(f"❌ Solve failed: {e}")
            return EXIT_FAILURE
        _banner(("✓ " if report.status == "Optimal" else "⚠️  ") + f"SOLVE FINISHED: {report.status}")
        _print_report(report)
        if args.output:
            print(f"Report: {args.output}")
        return _status_code(report.status)

    profile = PROFILES[args.profile]
    try:
        table = run_bench(
            variants=args.variants,
            sizes=args.sizes or profile["sizes"],
            scenario_counts=args.scenario_counts or profile["scenario_counts"],
            seeds=args.seeds,
            layout=args.layout,
            time_limit=args.time_limit or profile["time_limit"],
            node_limit=args.node_limit,
            workers=args.workers,
            output_dir=args.output_dir,
            timing=not args.no_timing,
        )
    except (NumericalBreakdown, BudgetExceeded, RuntimeError, ValueError, OSError) as e:
        print(f"❌ Benchmark failed: {e}")
        return EXIT_FAILURE
    _banner(f"✓ BENCHMARK COMPLETE ({len(table)} aggregate rows)")
    print(f"Summary: {Path(args.output_dir) / 'summary.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
