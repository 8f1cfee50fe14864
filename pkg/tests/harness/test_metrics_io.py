import pytest

from src.harness.metrics_io import (
    MetricsFormatError,
    RunMetrics,
    eval_frame_from_file,
    read_metrics,
    updates_path,
    write_metrics,
)
from src.trainer.update import UpdateStats


def make_stats(**overrides):
    values = dict(
        n_steps=4,
        actor_loss=-0.1,
        critic_loss=0.25,
        mean_rho=1.0 / 3.0,
        clip_fraction=0.125,
        mean_delta=1e-9,
        adv_mean=0.0,
        adv_std=1.0,
        actor_grad_norm=0.5,
        critic_grad_norm=2.0,
        entropy=0.0,
        n_skipped=0,
    )
    values.update(overrides)
    return UpdateStats(**values)


@pytest.fixture
def metrics():
    m = RunMetrics(config_hash="abcdef0123456789abcd")
    m.add_eval(0, 0.1, 0.1, 80.0)
    m.add_eval(1000, 2.0 / 3.0, 0.1 + 0.2, 41.25)
    m.add_update(1, 512, make_stats())
    return m


def test_round_trip_is_exact(metrics, tmp_path):
    fp = tmp_path / "metrics.csv"
    write_metrics(metrics, fp)
    back = read_metrics(fp)
    assert back.evals == metrics.evals
    assert back.updates == metrics.updates
    assert back.config_hash == metrics.config_hash
    assert back.version == metrics.version


def test_files_layout(metrics, tmp_path):
    fp = tmp_path / "metrics.csv"
    write_metrics(metrics, fp)
    assert updates_path(fp) == tmp_path / "metrics_updates.csv"
    lines = fp.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# config_hash=abcdef0123456789abcd version=")
    assert lines[1] == "env_ticks;success_rate;mean_return;mean_length"
    assert len(lines) == 4
    assert updates_path(fp).read_text(encoding="utf-8").splitlines()[1].startswith("phase;env_ticks;n_steps")


def test_eval_ticks_strictly_increasing():
    m = RunMetrics()
    m.add_eval(10, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="non croissants"):
        m.add_eval(10, 0.0, 0.0, 1.0)


def test_non_finite_metric_rejected():
    m = RunMetrics()
    with pytest.raises(ValueError, match="non finie"):
        m.add_eval(0, float("nan"), 0.0, 1.0)
    with pytest.raises(ValueError, match="non finie"):
        m.add_update(1, 8, make_stats(critic_loss=float("inf")))


def test_malformed_row_reports_line(metrics, tmp_path):
    fp = tmp_path / "metrics.csv"
    write_metrics(metrics, fp)
    lines = fp.read_text(encoding="utf-8").splitlines()
    lines[3] = "1000;beaucoup;0.3;41.25"
    fp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(MetricsFormatError) as exc:
        read_metrics(fp)
    assert exc.value.line == 4
    assert "success_rate" in str(exc.value)


def test_missing_value_reports_line(metrics, tmp_path):
    fp = tmp_path / "metrics.csv"
    write_metrics(metrics, fp)
    lines = fp.read_text(encoding="utf-8").splitlines()
    lines[2] = "0;0.1;;80"
    fp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(MetricsFormatError) as exc:
        read_metrics(fp)
    assert exc.value.line == 3


def test_missing_header(tmp_path):
    fp = tmp_path / "metrics.csv"
    fp.write_text("env_ticks;success_rate;mean_return;mean_length\n0;0;0;1\n", encoding="utf-8")
    with pytest.raises(MetricsFormatError) as exc:
        read_metrics(fp)
    assert exc.value.line == 1


def test_wrong_columns(tmp_path):
    fp = tmp_path / "metrics.csv"
    fp.write_text("# config_hash=x version=1\nticks;success\n0;0\n", encoding="utf-8")
    with pytest.raises(MetricsFormatError) as exc:
        read_metrics(fp)
    assert exc.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_metrics(tmp_path / "absent.csv")


def test_smoothed_frame(tmp_path):
    m = RunMetrics(config_hash="h")
    for i, s in enumerate([0.0, 1.0, 0.0, 1.0]):
        m.add_eval(i * 10, s, s, 5.0)
    fp = tmp_path / "metrics.csv"
    write_metrics(m, fp)
    df = eval_frame_from_file(fp, smooth=2)
    assert df["success_rate_smooth"].tolist() == [0.0, 0.5, 0.5, 0.5]
    assert "success_rate_smooth" not in eval_frame_from_file(fp).columns
