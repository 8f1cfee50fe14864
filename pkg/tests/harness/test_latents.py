import numpy as np
import pandas as pd
import pytest

from src.harness.latents import DTYPE_LATENT_STATS, latent_records, read_latents, summarize_latents, write_latents
from src.trainer.rollout import EvalResult


def eval_result(latents, successes):
    return EvalResult(
        success_rate=float(np.mean(successes)),
        mean_return=0.0,
        mean_length=1.0,
        successes=successes,
        latents=[np.asarray(lat, dtype=np.float64) for lat in latents],
    )


@pytest.fixture
def records():
    prior = eval_result([[[0.0, 0.0], [3.0, 4.0]], np.zeros((0, 2))], [False, False])
    final = eval_result([[[1.0, 1.0], [1.0, 3.0]], [[3.0, 1.0]]], [True, True])
    return latent_records("run", "prior", prior) + latent_records("run", "final", final)


def test_one_record_per_latent(records):
    assert len(records) == 5
    assert records[1] == {
        "run_id": "run",
        "phase": "prior",
        "episode": 0,
        "step": 1,
        "success": False,
        "values": [3.0, 4.0],
    }


def test_unknown_phase():
    with pytest.raises(ValueError):
        latent_records("run", "middle", eval_result([], []))


def test_write_append_read(records, tmp_path):
    fp = tmp_path / "latents.jsonl"
    write_latents(records[:2], fp)
    write_latents(records[2:], fp, append=True)
    df = read_latents(fp)
    assert len(df) == 5
    assert df["values"].tolist()[-1] == [3.0, 1.0]
    assert df["phase"].tolist() == ["prior", "prior", "final", "final", "final"]
    write_latents(records[:1], fp)
    assert len(read_latents(fp)) == 1


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_latents(tmp_path / "absent.jsonl")


def test_summary_statistics(records, tmp_path):
    fp = tmp_path / "latents.jsonl"
    write_latents(records, fp)
    stats = summarize_latents(read_latents(fp))
    assert list(stats.columns) == list(DTYPE_LATENT_STATS)
    assert stats["phase"].tolist() == ["prior", "final"]
    prior = stats.iloc[0]
    assert prior["count"] == 2
    assert prior["norm_mean"] == pytest.approx(2.5)
    assert prior["dispersion"] == pytest.approx(2.5)
    assert prior["temporal_diff"] == pytest.approx(5.0)
    final = stats.iloc[1]
    assert final["count"] == 3
    assert final["temporal_diff"] == pytest.approx(2.0)
    # centroïde des latents réussis: (5/3, 5/3)
    assert final["mahalanobis_to_success"] > 0
    assert np.isfinite(prior["mahalanobis_to_success"])


def test_summary_without_success_reference():
    prior = eval_result([[[0.0, 1.0], [1.0, 0.0]]], [False])
    stats = summarize_latents(
        pd.DataFrame(latent_records("r", "prior", prior)).astype({"success": "bool"})
    )
    assert np.isnan(stats.iloc[0]["mahalanobis_to_success"])


def test_summary_of_empty_frame():
    stats = summarize_latents(pd.DataFrame(columns=["phase", "success", "values"]))
    assert stats.empty
    assert list(stats.columns) == list(DTYPE_LATENT_STATS)
