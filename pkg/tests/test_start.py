import json
import os

import pandas as pd
import pytest

from ravenbench.constant import CONFIG_KW, Config
from ravenbench.generator import read_instances
from ravenbench.start import build_parser, main, resolve


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_generate_is_reproducible(workdir):
    assert main(["generate", "--space", "dsprites_reasoning", "--count", "5", "--seed", "7", "--out", "a/instances.jsonl"]) == 0
    assert main(["generate", "--space", "dsprites_reasoning", "--count", "5", "--seed", "7", "--out", "b/instances.jsonl"]) == 0
    assert (workdir / "a" / "instances.jsonl").read_bytes() == (workdir / "b" / "instances.jsonl").read_bytes()
    assert len(read_instances(str(workdir / "a" / "instances.jsonl"))) == 5
    manifest = json.loads((workdir / "a" / "manifest.json").read_text())
    assert manifest["generate"]["seeds"] == {"seed": 7}
    assert len(manifest["generate"]["outputs"]) == 1


def test_parallel_generation_matches(workdir):
    assert main(["generate", "--count", "4", "--seed", "3", "--out", "one.jsonl"]) == 0
    assert main(["generate", "--count", "4", "--seed", "3", "--jobs", "2", "--out", "two.jsonl"]) == 0
    assert (workdir / "one.jsonl").read_bytes() == (workdir / "two.jsonl").read_bytes()


def test_outputs_are_not_overwritten(workdir):
    assert main(["generate", "--count", "2", "--out", "a/instances.jsonl"]) == 0
    before = (workdir / "a" / "instances.jsonl").read_bytes()
    assert main(["generate", "--count", "3", "--seed", "1", "--out", "a/instances.jsonl"]) == 1
    assert (workdir / "a" / "instances.jsonl").read_bytes() == before
    assert main(["generate", "--count", "3", "--seed", "1", "--out", "a/instances.jsonl", "--force"]) == 0
    assert len(read_instances(str(workdir / "a" / "instances.jsonl"))) == 3


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        main(["shuffle"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["generate", "--count", "2"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["generate", "--space", "mnist", "--out", "x.jsonl"])
    assert e.value.code == 2


def test_config_file(workdir):
    (workdir / "run.yaml").write_text("eval_every: 50\nno-position-tags: true\n")
    config = Config("run.yaml")
    assert config.is_valid()
    assert os.path.samefile(config.filename, workdir / "run.yaml")
    assert config[CONFIG_KW.EVAL_EVERY] == 50
    assert config["eval_every"] == config["eval-every"] == 50
    assert config[CONFIG_KW.NO_POSITION_TAGS] is True
    (workdir / "list.yaml").write_text("- 1\n- 2\n")
    assert not Config("list.yaml").is_valid()
    (workdir / "bad.yaml").write_text("steps: [1\n")
    assert not Config("bad.yaml").is_valid()
    missing = Config("missing.yaml")
    assert not missing.is_valid()
    assert missing.filename is None


def test_config_file_precedence(workdir):
    (workdir / "run.yaml").write_text("count: 3\nseed: 5\n")
    args = build_parser().parse_args(["generate", "--config", "run.yaml", "--count", "2", "--out", "a/instances.jsonl"])
    assert resolve(args, [CONFIG_KW.COUNT, CONFIG_KW.SEED, CONFIG_KW.SPACE]) == {"count": 2, "seed": 5, "space": "dsprites_reasoning"}
    assert main(["generate", "--config", "run.yaml", "--out", "a/instances.jsonl"]) == 0
    assert len(read_instances(str(workdir / "a" / "instances.jsonl"))) == 3
    assert main(["generate", "--config", "run.yaml", "--count", "2", "--out", "b/instances.jsonl"]) == 0
    assert len(read_instances(str(workdir / "b" / "instances.jsonl"))) == 2


def test_render(workdir):
    assert main(["generate", "--count", "2", "--seed", "4", "--out", "tasks/instances.jsonl"]) == 0
    assert main(["render", "--instances", "tasks/instances.jsonl", "--out", "png"]) == 0
    assert len(list((workdir / "png").glob("*.png"))) == 30
    manifest = json.loads((workdir / "png" / "manifest.json").read_text())
    assert len(manifest["render"]["inputs"]) == 1


def test_eval_metrics(workdir):
    (workdir / "metrics.yaml").write_text("metric-params:\n  factor_vae:\n    votes: 200\n    eval_votes: 100\n    batch: 16\n")
    argv = ["eval-metrics", "--config", "metrics.yaml", "--repr", "gt_integer", "permuted_scaled:seed=1", "--metrics", "mig,factor_vae", "--seed", "1"]
    assert main(argv + ["--out", "out/scores.csv"]) == 0
    scores = pd.read_csv(workdir / "out" / "scores.csv")
    assert list(scores.columns) == ["model_id", "metric", "value", "params_digest", "seed"]
    assert len(scores) == 4
    assert set(scores.model_id) == {"gt_integer", "permuted_scaled-s1"}
    assert (scores.value > 1.0 - 1e-9).all()
    assert "eval-metrics" in json.loads((workdir / "out" / "manifest.json").read_text())


def test_eval_metrics_bad_metric(workdir):
    assert main(["eval-metrics", "--metrics", "accuracy", "--out", "scores.csv"]) == 1


def test_train_and_analyze(workdir):
    train = ["train-wren", "--repr", "gt_integer", "gt_onehot", "--wren-configs", "1", "--seeds", "2", "--steps", "2"]
    train += ["--batch", "2", "--eval-every", "1", "--eval-batches", "1", "--save-params", "--out", "run/curves.csv"]
    assert main(train) == 0
    curves = pd.read_csv(workdir / "run" / "curves.csv")
    assert len(curves) == 2 * 2 * 2
    assert set(curves.step) == {1, 2}
    assert {m.split("/")[0] for m in curves.model_id} == {"gt_integer", "gt_onehot"}
    assert len(list((workdir / "run" / "params").glob("*.json"))) == 4
    assert main(["eval-metrics", "--repr", "gt_integer", "gt_onehot", "--metrics", "mig", "--out", "run/scores.csv"]) == 0
    assert main(["analyze", "--scores", "run/scores.csv", "--curves", "run/curves.csv", "--out", "run/report"]) == 0
    report = json.loads((workdir / "run" / "report" / "report.json").read_text())
    assert report["models"] == 2
    assert set(json.loads((workdir / "run" / "manifest.json").read_text())) == {"train-wren", "eval-metrics"}


def test_ladder(workdir):
    argv = ["ladder", "--levels", "2", "--with-baselines", "--metrics", "mig", "--wren-configs", "1", "--seeds", "1", "--steps", "2"]
    argv += ["--batch", "2", "--eval-every", "1", "--eval-batches", "1", "--no-position-tags", "--out", "ladder"]
    assert main(argv) == 0
    scores = pd.read_csv(workdir / "ladder" / "scores.csv")
    assert len(scores) == 4
    assert set(scores.metric) == {"mig"}
    curves = pd.read_csv(workdir / "ladder" / "curves.csv")
    assert len(curves) == 4 * 2
    report = json.loads((workdir / "ladder" / "report.json").read_text())
    assert report["models"] == 4
    assert "mig" in report["correlations"]
    manifest = json.loads((workdir / "ladder" / "manifest.json").read_text())
    assert manifest["ladder"]["config"]["no-position-tags"] is True
    assert main(argv) == 1


@pytest.mark.slow
def test_metrics_predict_early_accuracy_better_than_late(workdir):
    argv = ["ladder", "--levels", "5", "--metrics", "disentanglement", "--wren-configs", "3", "--seeds", "2", "--steps", "20000"]
    argv += ["--eval-every", "5000", "--eval-batches", "20", "--jobs", "4", "--out", "ladder"]
    assert main(argv) == 0
    rho = json.loads((workdir / "ladder" / "report.json").read_text())["correlations"]
    assert rho["factor_vae"]["5000"] >= 0.5
    assert sum(rho[m]["5000"] > rho[m]["20000"] for m in rho) >= 3
