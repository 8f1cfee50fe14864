import pytest

from src.harness.config_io import config_hash, dump_config, load_config, save_config
from src.trainer.config import ConfigError, TrainerConfig


def test_empty_file_gives_defaults(tmp_path):
    fp = tmp_path / "config.yaml"
    fp.write_text("", encoding="utf-8")
    assert load_config(fp) == TrainerConfig()


def test_partial_file(tmp_path):
    fp = tmp_path / "config.yaml"
    fp.write_text("algo: rwfm\nbeta: 2\nactor_hidden: [32, 32]\n", encoding="utf-8")
    cfg = load_config(fp)
    assert cfg.algo == "rwfm" and cfg.beta == 2.0 and cfg.actor_hidden == [32, 32]


def test_invalid_gamma_reported(tmp_path):
    fp = tmp_path / "config.yaml"
    fp.write_text("gamma: 1.5\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config(fp)
    assert info.value.issues[0][0] == "gamma"


def test_ablation_flag_round_trip(tmp_path):
    cfg = TrainerConfig().replace(no_clip=True)
    fp = tmp_path / "config.yaml"
    save_config(cfg, fp)
    loaded = load_config(fp)
    assert loaded.no_clip is True
    assert loaded == cfg


def test_save_load_save_identical(tmp_path):
    cfg = TrainerConfig().replace(seed=3, eta=0.1, seeds=[1, 2, 3])
    a, b = tmp_path / "a.yaml", tmp_path / "b.yaml"
    save_config(cfg, a)
    save_config(load_config(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_hash_tracks_content():
    cfg = TrainerConfig()
    assert config_hash(cfg) == config_hash(TrainerConfig())
    assert config_hash(cfg) != config_hash(cfg.replace(seed=1))
    assert len(config_hash(cfg)) == 20


def test_dump_is_sorted():
    keys = [line.split(":")[0] for line in dump_config(TrainerConfig()).splitlines()]
    assert keys == sorted(keys)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("text", ["- 1\n- 2\n", "algo: [fpo\n"])
def test_malformed_file(tmp_path, text):
    fp = tmp_path / "config.yaml"
    fp.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(fp)
