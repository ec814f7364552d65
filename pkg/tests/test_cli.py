import json

import numpy as np
import pytest

from sedkit import fileio
from sedkit.cli import experiment_config, main
from sedkit.synth import EventAnnotation

TINY_CONFIG = {
    "dataset": {"splits": {"train": 6, "val": 3, "test": 3}, "master_seed": 9},
    "network": {
        "trunk": [{"kind": "conv", "width": 8, "kernel": 3}, {"kind": "dense", "width": 8}],
        "n_shared": 1,
        "sad_hidden": 4,
    },
    "training": {"max_epochs": 2, "batch_size": 4},
}


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


@pytest.fixture(scope="module")
def cli_root(tmp_path_factory):
    return tmp_path_factory.mktemp("cli_root")


def test_experiment_config_defaults_and_overrides(config_path):
    cfg = experiment_config(json.loads(config_path.read_text()), "exp4b")
    assert cfg.experiment_id == "exp4b"
    assert cfg.dataset.splits["train"] == 6
    assert cfg.network.n_shared == 1
    assert cfg.training.max_epochs == 2
    assert cfg.sed_threshold == 0.2 and cfg.sad_threshold == 0.5
    bare = experiment_config({}, "exp1")
    assert bare.dataset.splits == {"train": 600, "val": 200, "test": 200}
    assert bare.training.lr == 0.001


def test_synth_and_featurize(tmp_path, config_path, capsys):
    out = tmp_path / "data"
    main(["synth", "--config", str(config_path), "--out", str(out)])
    assert len(list((out / "train").glob("*.wav"))) == 6
    assert len(list((out / "test").glob("*.tsv"))) == 3
    assert (out / "dataset_config.json").exists()
    tsv = fileio.read_annotations(next((out / "train").glob("*.tsv")))
    assert all(0.0 <= e.onset < e.offset <= 10.0 for e in tsv)

    feats = tmp_path / "feats"
    main(["featurize", "--in", str(out), "--out", str(feats)])
    files = list((feats / "train").glob("*.f32"))
    assert len(files) == 6
    values, meta = fileio.load_features(files[0])
    assert values.shape == (40, 500)
    capsys.readouterr()


def test_train_predict_evaluate_roundtrip(tmp_path, config_path, cli_root, capsys):
    main([
        "train", "--experiment", "exp1", "--seed", "1",
        "--config", str(config_path), "--root", str(cli_root),
    ])
    out = capsys.readouterr().out
    weights = next(line.split(": ", 1)[1] for line in out.splitlines()
                   if line.startswith("weights:"))
    ds_dir = next((cli_root / "datasets").iterdir())
    feat_dir = cli_root / "features" / ds_dir.name

    pred = tmp_path / "pred"
    main([
        "predict", "--weights", weights, "--features", str(feat_dir / "test"),
        "--out", str(pred), "--reweight",
    ])
    assert len(list(pred.glob("*.tsv"))) == 3
    assert len(list(pred.glob("*_sed.f32"))) == 3

    main([
        "evaluate", "--ref", str(ds_dir / "test"), "--est", str(pred),
        "--mode", "segment", "--out", str(tmp_path / "report.json"),
    ])
    out = capsys.readouterr().out
    assert "F1 (%)" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["mode"] == "segment"
    assert 0.0 <= report["f1"] <= 100.0


def test_evaluate_known_scores(tmp_path, capsys):
    ref_dir = tmp_path / "ref"
    est_dir = tmp_path / "est"
    ref_dir.mkdir()
    est_dir.mkdir()
    fileio.write_annotations(ref_dir / "f1.tsv", [EventAnnotation(0.0, 3.0, "a")])
    fileio.write_annotations(est_dir / "f1.tsv", [EventAnnotation(0.0, 1.0, "a")])
    main(["evaluate", "--ref", str(ref_dir), "--est", str(est_dir),
          "--mode", "segment", "--out", str(tmp_path / "r.json")])
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["f1"] == pytest.approx(50.0)
    assert report["error_rate"] == pytest.approx(2.0 / 3.0)
    capsys.readouterr()


def test_experiment_command_writes_results(config_path, cli_root, capsys):
    main([
        "experiment", "--id", "exp1", "--seed", "1",
        "--config", str(config_path), "--root", str(cli_root),
    ])
    out = capsys.readouterr().out
    assert "exp1" in out and "config digest" in out
    run_dirs = list((cli_root / "runs").glob("exp1_*_s1"))
    assert len(run_dirs) == 1
    results = json.loads((run_dirs[0] / "results.json").read_text())
    assert results["rows"][0]["case"] == "exp1"


def test_experiment_threshold_sweep(config_path, cli_root, capsys):
    main([
        "experiment", "--id", "exp1", "--seed", "1", "--threshold-sweep",
        "--config", str(config_path), "--root", str(cli_root),
    ])
    out = capsys.readouterr().out
    assert "tau=0.2" in out and "tau=0.5" in out


def test_experiment_sweep_n_shared(config_path, cli_root, capsys):
    main([
        "experiment", "--id", "exp4a", "--seed", "1", "--sweep", "n_shared",
        "--sweep-values", "0,1", "--config", str(config_path), "--root", str(cli_root),
    ])
    out = capsys.readouterr().out
    assert "n_shared=0" in out and "n_shared=1" in out


def test_train_exp3_refused(config_path, cli_root):
    with pytest.raises(SystemExit):
        main(["train", "--experiment", "exp3", "--config", str(config_path),
              "--root", str(cli_root)])
