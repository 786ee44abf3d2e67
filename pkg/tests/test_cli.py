import csv
import json

import pytest

from wprsma.cli import EXIT_INVALID, EXIT_NODE_LIMIT, EXIT_OK, EXIT_USAGE, main
from wprsma.model import NetworkConfig, save_config
from wprsma.rl import QTable
from wprsma.sim import CSV_HEADER, ExperimentSpec


@pytest.fixture
def short_config(tmp_path):
    path = tmp_path / "net.json"
    save_config(NetworkConfig(horizon_T=3), path)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_is_deterministic(capsys, short_config, tmp_path):
    code, first, _ = run(capsys, "solve", "--config", short_config, "--seed", "1",
                         "--solver", "highs", "--out", str(tmp_path / "a.json"))
    assert code == EXIT_OK and "status optimal" in first
    code, second, _ = run(capsys, "solve", "--config", short_config, "--seed", "1",
                          "--solver", "highs", "--out", str(tmp_path / "b.json"))
    assert code == EXIT_OK and first == second
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()


def test_solve_reduced_and_export(capsys, tmp_path):
    cfg = tmp_path / "one.json"
    save_config(NetworkConfig(n_devices=1, horizon_T=2, distances=(5.0,)), cfg)
    lp = tmp_path / "m.lp"
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--reduced", "--n-intervals", "4",
                       "--export-lp", str(lp))
    assert code == EXIT_OK and "objective" in out
    text = lp.read_text()
    assert "\nMaximize\n" in text and text.rstrip().endswith("End")


def test_solve_node_limit_exit(capsys, short_config):
    code, _, err = run(capsys, "solve", "--config", short_config, "--node-limit", "1")
    assert code == EXIT_NODE_LIMIT and "gap" in err


def test_train_dumps_table(capsys, tmp_path):
    out = tmp_path / "q.json"
    code, text, _ = run(capsys, "train", "--steps", "500", "--decay", "0.002", "--out", str(out))
    assert code == EXIT_OK and text.startswith("states")
    assert len(QTable.load(out)) == int(text.split()[1])


@pytest.mark.parametrize("policy", ["Tdd", "Random", "Milp", "MilpReduced"])
def test_simulate_policies(capsys, short_config, tmp_path, policy):
    sched = tmp_path / f"{policy}.json"
    code, out, _ = run(capsys, "simulate", "--config", short_config, "--policy", policy,
                       "--seed", "2", "--out", str(sched))
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0].startswith("slot mode") and len(lines) == 3 + 2
    code, out, _ = run(capsys, "validate", str(sched))
    assert code == EXIT_OK and out.splitlines()[-1].startswith("valid")


def test_simulate_qlearning_with_table(capsys, short_config, tmp_path):
    table = tmp_path / "q.json"
    assert main(["train", "--config", short_config, "--steps", "300", "--decay", "0.004",
                 "--out", str(table)]) == EXIT_OK
    code, out, _ = run(capsys, "simulate", "--config", short_config, "--policy", "QLearning",
                       "--table", str(table))
    assert code == EXIT_OK and "weighted_throughput" in out


def test_validate_rejects_energy_overdraw(capsys, short_config, tmp_path):
    path = tmp_path / "s.json"
    assert main(["simulate", "--config", short_config, "--policy", "Tdd", "--out", str(path)]) == 0
    capsys.readouterr()
    data = json.loads(path.read_text())
    # turn the first slot into an uplink burst from an empty battery
    slot = data["slots"][0]
    slot.update(mode="U", mu_c=0.0, mu=[0.0, 0.0], rho=[0.0, 0.0], omega_c=None, nu=None,
                C=[0, 0], D=[0, 0], p=[[0.0, 0.0], [5e-3, 0.0]], U=[[0, 0], [0, 0]])
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "validate", str(path))
    assert code == EXIT_INVALID
    assert "slot 0 device 1: energy" in out


def test_sweep_row_count(capsys, tmp_path):
    spec = ExperimentSpec(param="sic_threshold", values=[2, 4, 6], runs=2,
                          base=NetworkConfig(horizon_T=2), policies=["Tdd", "Random"])
    spec.save(tmp_path / "e.json")
    out = tmp_path / "r.csv"
    code, text, _ = run(capsys, "sweep", str(tmp_path / "e.json"), "--out", str(out),
                        "--runs", "3", "--seed", "5", "--policy", "Tdd", "--no-timing")
    assert code == EXIT_OK and text.strip().endswith("rows 9")
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER and len(rows) == 1 + 3 * 3 * 1
    assert {r[-1] for r in rows[1:]} == {"0.000"}


@pytest.mark.parametrize("argv", [[], ["bogus"], ["solve", "--seed", "x"],
                                  ["simulate", "--policy", "Oracle"], ["sweep"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE and "error" in err


def test_bad_config_is_usage_error(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_devices": 2, "colour": "red"}))
    code, _, err = run(capsys, "solve", "--config", str(bad))
    assert code == EXIT_USAGE and "colour" in err
    code, _, err = run(capsys, "validate", str(tmp_path / "missing.json"))
    assert code == EXIT_USAGE
