import json

import pytest

from packsim import cli, experiment
from packsim.errors import InvariantBreachError


def two_phase_config(**extra):
    data = {
        "model": {
            "num_phases": 2,
            "internal_rates": [[0.0, 1.0], [1.0, 0.0]],
            "departure_rates": [1.0, 2.0],
            "arrival_coeffs": [1.0, 1.0],
        },
        "kmax": 3,
        "cost": {
            "type": "overcommit",
            "weights": [[1.0], [2.0]],
            "capacity": [3.0],
        },
        "epsilon": 0.1,
        "r_values": [4],
        "horizon_events": 20000,
        "warmup_fraction": 0.1,
        "replications": 1,
        "master_seed": 7,
    }
    data.update(extra)
    return data


def write_config(tmp_path, data, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_lp_solve_summary(tmp_path, capsys):
    path = write_config(tmp_path, two_phase_config())
    code = cli.main(["lp-solve", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 0
    out = capsys.readouterr().out
    assert "phi* = 1.4" in out
    sol = json.loads((tmp_path / "o" / "lp_solution.json").read_text())
    assert sol["phi"] == pytest.approx(1.4, abs=1e-9)
    assert sol["config_order"][0] == [0, 0]
    summary = json.loads((tmp_path / "o" / "lp_summary.json").read_text())
    assert summary["servers_needed"]["4"]["nbar"] == pytest.approx(4 / 1.4)


def test_lp_solve_single_phase_analytic(tmp_path, capsys):
    data = two_phase_config()
    data["model"] = {
        "num_phases": 1,
        "internal_rates": [[0.0]],
        "departure_rates": [1.0],
        "arrival_coeffs": [1.0],
    }
    data["kmax"] = 1
    data["cost"] = {"type": "table", "values": [0.0, 0.0]}
    data["epsilon"] = 0.0
    path = write_config(tmp_path, data)
    assert cli.main(["lp-solve", "--config", path, "--out", str(tmp_path / "o")]) == 0
    sol = json.loads((tmp_path / "o" / "lp_solution.json").read_text())
    assert sol["phi"] == pytest.approx(1.0, abs=1e-9)


def test_malformed_json_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"model": [,}')
    code = cli.main(["lp-solve", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_missing_field_exit_2(tmp_path, capsys):
    data = two_phase_config()
    del data["model"]["departure_rates"]
    path = write_config(tmp_path, data)
    code = cli.main(["lp-solve", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "config.model" in capsys.readouterr().err


def test_infeasible_exit_3(tmp_path, capsys):
    # Strictly positive costs with a tiny budget: empty-only solution.
    data = two_phase_config()
    data["cost"] = {
        "type": "table",
        "values": [0.0, 1, 1, 2, 2, 2, 3, 3, 3, 3],
    }
    data["epsilon"] = 0.001
    path = write_config(tmp_path, data)
    code = cli.main(["lp-solve", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 3
    assert "infeasible" in capsys.readouterr().err.lower()


def test_invariant_breach_exit_4(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise InvariantBreachError("t=1.0: synthetic breach")

    monkeypatch.setattr(experiment, "run_sweep", boom)
    path = write_config(tmp_path, two_phase_config())
    code = cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o")])
    assert code == 4


def test_simulate_csv_shape(tmp_path):
    path = write_config(tmp_path, two_phase_config())
    code = cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "o")]
    )
    assert code == 0
    lines = (tmp_path / "o" / "metrics.csv").read_text().splitlines()
    # Header, one replication row, one summary row.
    assert len(lines) == 3
    assert lines[0].startswith("r,replication,seed")
    assert lines[1].split(",")[1] == "0"
    assert lines[2].split(",")[1] == "all"
    resolved = json.loads((tmp_path / "o" / "resolved_config.json").read_text())
    assert "input_hash" in resolved and resolved["replications"] == 1


def test_simulate_trace_flag(tmp_path):
    data = two_phase_config(horizon_events=3000)
    path = write_config(tmp_path, data)
    code = cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "o"), "--trace"]
    )
    assert code == 0
    traces = list((tmp_path / "o").glob("trace_r*.ndjson"))
    assert traces
    first = json.loads(traces[0].read_text().splitlines()[0])
    assert set(first) == {"time", "kind", "pool", "server", "type"}


def test_simulate_deterministic_csv(tmp_path):
    path = write_config(tmp_path, two_phase_config(replications=2))
    assert cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "a"),
         "--workers", "2"]
    ) == 0
    assert cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "b")]
    ) == 0
    csv_a = (tmp_path / "a" / "metrics.csv").read_bytes()
    csv_b = (tmp_path / "b" / "metrics.csv").read_bytes()
    assert csv_a == csv_b  # worker count must not matter


def test_simulate_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, two_phase_config())
    cli.main(["simulate", "--config", path, "--out", str(tmp_path / "a")])
    cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "b"),
         "--seed", "123"]
    )
    assert (tmp_path / "a" / "metrics.csv").read_bytes() != (
        tmp_path / "b" / "metrics.csv"
    ).read_bytes()


def test_resolved_config_reruns_identically(tmp_path):
    path = write_config(tmp_path, two_phase_config())
    cli.main(["simulate", "--config", path, "--out", str(tmp_path / "a")])
    resolved = json.loads((tmp_path / "a" / "resolved_config.json").read_text())
    for drop in ("input_hash", "package_version", "backend"):
        resolved.pop(drop)
    path2 = write_config(tmp_path, resolved, name="resolved.json")
    cli.main(["simulate", "--config", path2, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (
        tmp_path / "b" / "metrics.csv"
    ).read_bytes()


def test_baselines_csv(tmp_path):
    data = two_phase_config(baselines=["first-fit"], horizon_events=10000)
    path = write_config(tmp_path, data)
    assert cli.main(
        ["simulate", "--config", path, "--out", str(tmp_path / "o")]
    ) == 0
    lines = (tmp_path / "o" / "baselines.csv").read_text().splitlines()
    assert lines[0] == "strategy,r,active,cost_per_active"
    assert lines[1].startswith("first-fit,4")


def test_verify_single_report(tmp_path, capsys):
    data = two_phase_config(horizon_events=200000)
    path = write_config(tmp_path, data)
    code = cli.main(
        ["verify-single", "--config", path, "--out", str(tmp_path / "o")]
    )
    assert code == 0
    report = json.loads((tmp_path / "o" / "verify_report.json").read_text())
    assert report["num_classes"] == 1
    cls = report["classes"][0]
    assert cls["tv_oracle_vs_lp"] <= 1e-8
    assert cls["request_rate_dev"] <= 1e-8
    assert cls["simulation"]["pi_within_3se"]
    assert cls["simulation"]["freq_within_3se"]
