import json

import pytest

import main


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def test_lp_enumerate_writes_a_report(tmp_path):
    assert main.run(["lp", "--enumerate", "3", "--output-dir", str(tmp_path), "--csv"]) == 0
    report = read_report(tmp_path / "lp-enumerate-seed0.json")
    assert report["schema"] == 1
    assert report["command"] == "lp"
    assert report["status"] == "ok"
    assert report["result"]["count"] == 5
    assert report["result"]["patterns"][0] == "1-2,3-4,5-6"
    assert (tmp_path / "lp-enumerate-seed0-patterns.csv").read_text().startswith("index,pattern\n")


def test_lp_faces(tmp_path):
    assert main.run(["lp", "--faces", "1-6,2-5,3-4", "--output-dir", str(tmp_path)]) == 0
    assert read_report(tmp_path / "lp-faces-seed0.json")["result"]["sizes"] == [2, 4, 4, 2]


@pytest.mark.parametrize("argv", [
    ["lp", "--validate", "1-2", "--kappa", "9"],
    ["lp", "--faces", "1-3,2-4"],
    ["zeta", "--kappa", "5", "--pattern", "1-2", "--points", "0,1"],
    ["sle-trace", "--kappa", "2", "--points", "1,0.5", "--rho", "1,1"],
])
def test_invalid_input_exits_with_two(tmp_path, argv):
    assert main.run(argv + ["--output-dir", str(tmp_path)]) == 2
    assert not list(tmp_path.glob("*.json"))


def test_enumeration_guard_exits_with_three(tmp_path):
    assert main.run(["lp", "--enumerate", "11", "--output-dir", str(tmp_path)]) == 3


def test_config_file_and_flags(tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text(json.dumps({"subcommand": "lp", "n_links": 2, "seed": 4}))
    assert main.run(["lp", "--config", str(config), "--output-dir", str(tmp_path)]) == 0
    report = read_report(tmp_path / "lp-enumerate-seed4.json")
    assert report["result"]["count"] == 2
    assert report["config"]["seed"] == 4

    config.write_text(json.dumps({"subcommand": "green"}))
    assert main.run(["lp", "--config", str(config), "--output-dir", str(tmp_path)]) == 2


def test_same_seed_gives_the_same_report(tmp_path):
    reports = []
    for name, threads in (("a", "1"), ("b", "4")):
        directory = tmp_path / name
        argv = ["sle-trace", "--batch", "--kappa", "2", "--n", "600", "--dt", "0.01", "--horizon", "0.2", "--seed", "8", "--threads", threads, "--block-size", "128", "--output-dir", str(directory), "--csv"]
        assert main.run(argv) == 0
        report = read_report(directory / "sle-trace-batch-seed8.json")
        report.pop("timestamp")
        report["config"].pop("threads")
        report["config"].pop("output_dir")
        reports.append((report, (directory / "sle-trace-batch-seed8-checkpoints.csv").read_text()))
    assert reports[0] == reports[1]


def test_trace_with_forces(tmp_path):
    argv = ["sle-trace", "--trace", "--kappa", "2", "--points=-0,1", "--rho=0.5,1", "--horizon", "0.1", "--dt", "0.01", "--seed", "1", "--output-dir", str(tmp_path), "--csv"]
    assert main.run(argv) == 0
    report = read_report(tmp_path / "sle-trace-trace-seed1.json")
    assert report["result"]["capacity"] == pytest.approx(0.1)
    assert report["result"]["trace_status"] == "ok"
    assert (tmp_path / "sle-trace-trace-seed1-driving.csv").exists()
    assert (tmp_path / "sle-trace-trace-seed1-trace.csv").exists()


def test_exponents_table(tmp_path):
    assert main.run(["exponents", "--output-dir", str(tmp_path)]) == 0
    rows = read_report(tmp_path / "exponents-table-seed0.json")["result"]["rows"]
    assert len(rows) == 35
    assert rows[0]["kappa"] == 0.5
