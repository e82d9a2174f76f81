import pandas as pd
import pytest

from twatsp_benders.main import EXIT_OK, EXIT_USAGE, PROFILES, build_parser, main
from twatsp_benders.master_bnc import read_report
from twatsp_benders.model import read_instance, read_scenarios


def _generate(tmp_path, n=3, scenarios=3, seed=0):
    assert main(["generate", "--n", str(n), "--scenarios", str(scenarios), "--seed", str(seed), "--output-dir", str(tmp_path)]) == EXIT_OK
    name = f"random_nw_n{n}_s{seed}"
    return tmp_path / f"{name}.json", tmp_path / f"{name}_w{scenarios}_scenarios.json"


def test_unknown_variant_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--toy", "--variant", "xyz"])
    assert exc.value.code == EXIT_USAGE
    assert "invalid choice" in capsys.readouterr().err


def test_solve_needs_inputs():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--variant", "tbd"])
    assert exc.value.code == EXIT_USAGE


def test_toy_solve(capsys):
    assert main(["solve", "--toy", "--variant", "tbd"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Objective:       7.500000" in out
    assert "Optimality cuts: 3" in out


def test_generate_writes_readable_files(tmp_path):
    instance_path, scenario_path = _generate(tmp_path, n=4, scenarios=5, seed=2)
    instance = read_instance(instance_path)
    scenarios = read_scenarios(scenario_path)
    assert instance.n == 4
    assert len(scenarios) == 5


def test_solve_writes_byte_stable_reports(tmp_path):
    instance_path, scenario_path = _generate(tmp_path)
    outputs = []
    for k in range(2):
        out = tmp_path / f"report{k}.json"
        code = main([
            "solve", "--instance", str(instance_path), "--scenarios", str(scenario_path),
            "--variant", "tbdp", "--frac-actual", "0.34", "--no-timing", "--output", str(out),
            "--plan-dump", str(tmp_path / "plan.json"),
        ])
        assert code == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert read_report(tmp_path / "report0.json").status == "Optimal"
    assert (tmp_path / "plan.json").exists()


def test_missing_input_file_fails(tmp_path, capsys):
    code = main(["solve", "--instance", str(tmp_path / "none.json"), "--scenarios", str(tmp_path / "none.json")])
    assert code == 1
    assert "Could not read input" in capsys.readouterr().out


@pytest.mark.slow
def test_bench_tables(tmp_path):
    code = main([
        "bench", "--variants", "bd", "tbd", "--sizes", "3", "--scenario-counts", "3", "--seeds", "0", "1",
        "--no-timing", "--output-dir", str(tmp_path),
    ])
    assert code == EXIT_OK

    runs = pd.read_csv(tmp_path / "runs.csv")
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert len(runs) == 4
    assert list(summary["variant"]) == ["bd", "tbd"]
    assert list(summary["# Solved"]) == [2, 2]
    assert "Time to opt. (min.)" not in summary.columns
    lines = (tmp_path / "summary.md").read_text().splitlines()
    header = [cell.strip() for cell in lines[0].strip("|").split("|")]
    assert header[:4] == ["n", "scenarios", "variant", "# Solved"]
    assert set(lines[1]) <= set("|-: ")
    assert len(lines) == 4
    assert len(list((tmp_path / "runs").glob("*.json"))) == 4


def test_profile_names_and_solve_defaults():
    args = build_parser().parse_args(["bench", "--profile", "paper"])
    assert PROFILES[args.profile] == {"sizes": [25], "scenario_counts": [100], "time_limit": 3 * 3600.0}
    assert build_parser().parse_args(["bench"]).profile == "desk"

    args = build_parser().parse_args(["solve", "--toy"])
    assert args.ap_scope == "sp_only"
    assert args.fractional_cuts == 0
