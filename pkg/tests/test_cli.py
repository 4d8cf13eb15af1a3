import json

import pandas as pd

from flowagg.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from flowagg.ml import ids, svm

from tests.helpers import cluster_samples


def write_config(path, **data):
    path.write_text(json.dumps({"name": "cli", "duration": 10.0, "analyzer": {"mode": "MMOS_only"}, **data}))
    return str(path)


def test_run_writes_outputs(tmp_path, capsys):
    config = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"

    assert main(["run", "--config", config, "--out", str(out), "--seed", "4"]) == EXIT_OK

    assert (out / "flow_entries.csv").read_text().startswith("t,total_entries\n")
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 4
    assert "cli: mode=MMOS_only" in capsys.readouterr().out


def test_run_then_replay(tmp_path):
    config = write_config(tmp_path / "cfg.json")
    schedule = tmp_path / "schedule.csv"
    assert main(["run", "--config", config, "--schedule-out", str(schedule)]) == EXIT_OK
    assert main(["replay", "--config", config, str(schedule)]) == EXIT_OK


def test_invalid_config_exit_code(tmp_path, capsys):
    config = write_config(tmp_path / "bad.json", analyzer={"mode": "Threshold"})
    assert main(["run", "--config", config]) == EXIT_CONFIG
    assert "config error: analyzer" in capsys.readouterr().err


def test_train_svm(tmp_path, capsys):
    samples = tmp_path / "samples.csv"
    model = tmp_path / "svm.json"
    svm.write_samples(svm.rule_labelled_samples(60, f_cap=300, seed=1, band=0.1), str(samples))

    assert main(["train-svm", str(samples), str(model), "--c", "10000"]) == EXIT_OK

    assert svm.load_model(str(model)).f_cap == 300
    assert "accuracy=1.000" in capsys.readouterr().out


def test_train_svm_missing_input(tmp_path):
    assert main(["train-svm", str(tmp_path / "none.csv"), str(tmp_path / "m.json")]) == EXIT_RUNTIME


def test_train_ids(tmp_path):
    features = tmp_path / "features.csv"
    grid = tmp_path / "grid.json"
    ids.write_features(cluster_samples(n=10), str(features))

    assert main(["train-ids", str(features), str(grid), "--grid-size", "3", "--epochs", "20"]) == EXIT_OK
    assert ids.load_grid(str(grid)).grid_size == 3


def test_sweep_command(tmp_path):
    config = write_config(tmp_path / "cfg.json", duration=5.0)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", config, "--rates", "5,10", "--out", str(out)]) == EXIT_OK
    cells = pd.read_csv(out / "cells.csv", keep_default_na=False)
    assert len(cells) == 10
    # no model configured: the DATA cells fail without stopping the sweep
    failed = cells[cells["error"] != ""]
    assert sorted(failed["scheme"]) == ["DATA", "DATA"]
    assert all(failed["error"].str.startswith("ConfigInvalid"))


def test_bad_rates(tmp_path):
    config = write_config(tmp_path / "cfg.json")
    assert main(["sweep", "--config", config, "--rates", "5,x"]) == EXIT_CONFIG
