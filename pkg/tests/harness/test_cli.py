import numpy as np
import pytest

from src.harness import cli
from src.harness.checkpoint import load_checkpoint
from src.harness.cli import (
    EXIT_CHECKPOINT,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_TRAINING,
    EXIT_USAGE,
    build_parser,
    cli_main,
    resolve_config,
)
from src.harness.config_io import save_config
from src.harness.latents import read_latents
from src.harness.manifest import read_manifest
from src.harness.metrics_io import RunMetrics, read_metrics, write_metrics
from src.trainer.errors import TrainingError


@pytest.fixture
def cfg_file(tiny_cfg, tmp_path):
    fp = tmp_path / "tiny.yaml"
    save_config(tiny_cfg, fp)
    return fp


@pytest.fixture
def run(cfg_file, tmp_path):
    out = tmp_path / "run"

    def _run(*argv):
        return cli_main([argv[0], "--config", str(cfg_file), "--out", str(out), *argv[1:]])

    _run.out = out
    return _run


def test_version_exits_ok(capsys):
    assert cli_main(["--version"]) == EXIT_OK


@pytest.mark.parametrize(
    "argv",
    [[], ["train", "--bogus"], ["unknown"], ["eval"], ["train", "--algo", "sac"], ["plot", "--smooth", "x"]],
)
def test_usage_errors(argv):
    assert cli_main(argv) == EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert cli_main(["pretrain", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)]) == EXIT_IO


def test_invalid_config(tmp_path, capsys):
    fp = tmp_path / "bad.yaml"
    fp.write_text("gamma: 1.5\nwindow: 0\n", encoding="utf-8")
    assert cli_main(["pretrain", "--config", str(fp), "--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "gamma" in err and "window" in err


def test_corrupt_checkpoint(run, tmp_path):
    fp = tmp_path / "bad.ckpt"
    fp.write_bytes(b"not a checkpoint at all")
    assert run("eval", "--checkpoint", str(fp)) == EXIT_CHECKPOINT


def test_missing_checkpoint(run, tmp_path):
    assert run("eval", "--checkpoint", str(tmp_path / "absent.ckpt")) == EXIT_IO


def test_resolve_config_overrides(cfg_file, tiny_cfg):
    args = build_parser().parse_args(["train", "--config", str(cfg_file), "--seed", "7", "--env", "pushblock"])
    cfg = resolve_config(args)
    assert cfg.seed == 7 and cfg.env == "pushblock"
    assert cfg.window == tiny_cfg.window


def test_plot_command(tmp_path):
    m = RunMetrics(config_hash="h")
    m.add_eval(0, 0.0, 0.0, 10.0)
    m.add_eval(100, 0.5, 0.5, 8.0)
    fp = tmp_path / "metrics.csv"
    write_metrics(m, fp)
    assert cli_main(["plot", "--metrics", str(fp)]) == EXIT_OK
    assert (tmp_path / "curves.svg").is_file()
    assert cli_main(["plot", "--metrics", str(fp)]) == EXIT_IO
    assert cli_main(["plot", "--metrics", str(fp), "--redo"]) == EXIT_OK


def test_plot_malformed_metrics(tmp_path):
    fp = tmp_path / "metrics.csv"
    fp.write_text("# config_hash=h version=1\nenv_ticks;success_rate;mean_return;mean_length\n0;x;0;1\n")
    assert cli_main(["plot", "--metrics", str(fp)]) == EXIT_IO


def test_gen_demos_then_pretrain(run, tiny_cfg):
    assert run("gen-demos", "--episodes", "3") == EXIT_OK
    demos = run.out / "demos.jsonl"
    assert demos.is_file()
    assert read_manifest(run.out / "manifest.yaml").command == "gen-demos"
    assert run("gen-demos") == EXIT_IO
    assert run("pretrain", "--demos", str(demos)) == EXIT_OK
    ckpt = load_checkpoint(run.out / "prior.ckpt")
    assert ckpt.header["kind"] == "prior"
    assert ckpt.config == tiny_cfg


def test_train_eval_dump_latents(run, capsys):
    assert run("pretrain") == EXIT_OK
    assert run("train", "--checkpoint", str(run.out / "prior.ckpt")) == EXIT_OK
    outputs = ("metrics.csv", "metrics_updates.csv", "checkpoint.ckpt", "latents.jsonl", "latent_stats.csv", "buffer.jsonl")
    for name in outputs:
        assert (run.out / name).is_file(), name
    metrics = read_metrics(run.out / "metrics.csv")
    assert metrics.evals[0]["env_ticks"] == 0
    assert load_checkpoint(run.out / "checkpoint.ckpt").header["kind"] == "trained"
    assert run("train") == EXIT_IO

    capsys.readouterr()
    assert run("eval", "--checkpoint", str(run.out / "checkpoint.ckpt"), "--episodes", "2") == EXIT_OK
    assert "succès" in capsys.readouterr().out

    n_before = len(read_latents(run.out / "latents.jsonl"))
    assert run("dump-latents", "--checkpoint", str(run.out / "checkpoint.ckpt"), "--append", "--phase", "mid") == EXIT_OK
    df = read_latents(run.out / "latents.jsonl")
    assert len(df) > n_before
    assert "mid" in set(df["phase"])


def test_train_with_mismatched_prior(run):
    assert run("pretrain") == EXIT_OK
    assert run("train", "--algo", "gppo", "--checkpoint", str(run.out / "prior.ckpt"), "--redo") == EXIT_CONFIG


@pytest.mark.parametrize("budget", [64, pytest.param(10_000, marks=pytest.mark.slow)])
def test_train_twice_is_byte_identical(tiny_cfg, tmp_path, budget):
    fp = tmp_path / "cfg.yaml"
    save_config(tiny_cfg.replace(budget=budget, eval_interval=max(budget // 10, 1)), fp)
    prior_dir = tmp_path / "prior"
    assert cli_main(["pretrain", "--config", str(fp), "--out", str(prior_dir)]) == EXIT_OK
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        argv = ["train", "--config", str(fp), "--out", str(out), "--checkpoint", str(prior_dir / "prior.ckpt")]
        assert cli_main(argv) == EXIT_OK
    for name in ("metrics.csv", "metrics_updates.csv", "checkpoint.ckpt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_train_resumes_critics_from_checkpoint(run, monkeypatch):
    assert run("pretrain") == EXIT_OK
    assert run("train", "--checkpoint", str(run.out / "prior.ckpt")) == EXIT_OK
    ckpt = load_checkpoint(run.out / "checkpoint.ckpt")
    seen = {}

    def fake_train(cfg, out_dir=None, prior=None, seed=None):
        seen["prior"] = prior
        raise TrainingError("arrêt simulé", algo=cfg.algo)

    monkeypatch.setattr(cli, "train", fake_train)
    assert run("train", "--checkpoint", str(run.out / "checkpoint.ckpt"), "--redo") == EXIT_TRAINING
    critics = seen["prior"].critics
    assert critics is not None
    for i, (c, t) in enumerate(zip(critics.critics, critics.targets)):
        assert np.array_equal(c.params, ckpt.blocks[f"critic_{i}"])
        assert np.array_equal(t.params, ckpt.blocks[f"target_{i}"])
