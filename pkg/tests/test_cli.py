import json
import subprocess
import sys

import pytest

from lgwalk.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main

SMALL = ["--task", "multiclass", "--train-per-class", "5", "--dim", "8", "--epochs", "2", "--t", "6",
         "--window", "4", "--negatives", "2", "--rounds", "5"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("syn")
    assert main(["synth", "--sizes", "20,20,20", "-p", "0.3", "-q", "0.05", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_synth_outputs(data):
    assert (data / "edges.txt").read_text().strip()
    assert len((data / "labels.txt").read_text().splitlines()) == 60
    assert json.loads((data / "spec.json").read_text())["sizes"] == [20, 20, 20]


def test_train_eval_diagnose(data, tmp_path, capsys):
    io = ["--edges", str(data / "edges.txt"), "--labels", str(data / "labels.txt")]
    assert main(["train", *io, *SMALL, "--out", str(tmp_path / "run")]) == EXIT_OK
    for name in ("epochs.csv", "gains.csv", "embeddings.txt", "model.npz", "manifest.json"):
        assert (tmp_path / "run" / name).exists()
    assert main(["eval", "--embeddings", str(tmp_path / "run" / "embeddings.txt"), *io, "--task", "multiclass",
                 "--train-per-class", "5"]) == EXIT_OK
    assert main(["diagnose", "--model", str(tmp_path / "run" / "model.npz"), "--edges",
                 str(data / "edges.txt")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "accuracy" in out and "ratio" in out


def test_config_file_with_flag_override(data, tmp_path):
    conf = tmp_path / "c.cfg"
    conf.write_text(f"edges = {data / 'edges.txt'}\ntask = clustering\nclusters = 3\nepochs = 5\ndim = 4\n"
                    "method = baseline\n")
    assert main(["train", "--config", str(conf), "--epochs", "1", "--set", "t=4", "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["epochs"] == 1 and manifest["config"]["t"] == 4
    assert manifest["config"]["clusters"] == 3


def test_sweep_and_node2vec_preset(data, tmp_path):
    io = ["--edges", str(data / "edges.txt"), "--labels", str(data / "labels.txt")]
    assert main(["sweep", *io, *SMALL, "--grid-rounds", "2,3", "--grid-powers", "1", "--grid-t-primes", "1",
                 "--out", str(tmp_path / "s")]) == 0
    assert len((tmp_path / "s" / "sweep.csv").read_text().splitlines()) == 3
    assert main(["sweep", *io, *SMALL, "--epochs", "1", "--preset", "node2vec", "--node2vec-values", "1,2",
                 "--out", str(tmp_path / "n")]) == 0
    assert len((tmp_path / "n" / "node2vec.csv").read_text().splitlines()) == 5


def test_diagnose_training_mode(data, tmp_path):
    assert main(["diagnose", "--edges", str(data / "edges.txt"), "--labels", str(data / "labels.txt"), *SMALL,
                 "--n-background", "20", "--out", str(tmp_path / "d")]) == 0
    assert "bg_loss" in (tmp_path / "d" / "epochs.csv").read_text().splitlines()[0]


def test_exit_codes(data, tmp_path):
    assert main(["train", "--edges", str(data / "edges.txt"), "--epochs", "0"]) == EXIT_CONFIG
    assert main(["train", "--set", "bogus=1"]) == EXIT_CONFIG
    assert main(["train", "--edges", str(tmp_path / "missing.txt")]) == EXIT_DATA
    bad = tmp_path / "bad.txt"
    bad.write_text("a b -2\n")
    assert main(["train", "--edges", str(bad)]) == EXIT_DATA
    assert main(["train", "--edges", str(data / "edges.txt"), "--task", "multiclass"]) == EXIT_DATA
    assert main(["train", "--edges", str(data / "edges.txt"), "--task", "clustering", "--clusters", "3",
                 "--epochs", "1", "--dim", "4", "--lr-start", "1e300", "--lr-end", "1e299",
                 "--out", str(tmp_path / "x")]) == EXIT_NUMERIC


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lgwalk", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("train", "eval", "synth", "sweep", "diagnose"):
        assert sub in res.stdout
