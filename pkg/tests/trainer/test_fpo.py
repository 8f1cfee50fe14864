import logging

import numpy as np
import pytest

from src.agent.gaussian_actor import GaussianActor
from src.envlab.demos import generate_demos
from src.envlab.envs import make_env
from src.numkit.rng import make_rng
from src.trainer.config import TrainerConfig
from src.trainer.errors import TrainingError
from src.trainer.fpo import Prior, build_prior, check_cache_integrity, configure_actor, train
from src.trainer.rollout import evaluate


@pytest.fixture
def prior(tiny_cfg):
    return build_prior(tiny_cfg)


def test_build_prior_freezes_decoder(tiny_cfg, prior):
    assert prior.decoder.frozen and prior.decoder.verify()
    assert len(prior.bc_losses) == tiny_cfg.bc_epochs
    assert 0.0 <= prior.demo_success <= 1.0


def test_build_prior_from_given_demos(tiny_cfg):
    env = make_env(tiny_cfg.env, chunk_len=tiny_cfg.chunk_len, horizon=tiny_cfg.horizon)
    episodes = generate_demos(env, "expert", 3, make_rng(9))
    demos = (np.concatenate([ep.states for ep in episodes]), np.concatenate([ep.chunks for ep in episodes]))
    res = build_prior(tiny_cfg, demos=demos)
    assert np.isnan(res.demo_success)
    with pytest.raises(ValueError, match="dimensions"):
        build_prior(tiny_cfg, demos=(demos[0][:, :2], demos[1]))


def test_build_prior_gaussian_for_gppo(tiny_cfg):
    res = build_prior(tiny_cfg.replace(algo="gppo"))
    assert isinstance(res.actor, GaussianActor)


def test_configure_actor_applies_sampling_settings(tiny_cfg, prior):
    actor = configure_actor(prior.actor, tiny_cfg.replace(explore_steps=3, single_step=True, eta=0.2))
    assert actor.explore_steps == 1
    assert actor.eta == 0.2
    assert actor.n_sample_steps == tiny_cfg.n_sample_steps
    assert np.array_equal(actor.params, prior.actor.params)
    assert actor.params is not prior.actor.params


def test_train_runs_budget_and_evaluates(tiny_cfg, prior):
    res = train(tiny_cfg, prior=prior)
    ticks = [row["env_ticks"] for row in res.metrics.evals]
    assert ticks[0] == 0
    assert all(b > a for a, b in zip(ticks, ticks[1:]))
    assert ticks[-1] == res.env_ticks >= tiny_cfg.budget
    assert {"prior", "final"} <= set(res.latents)
    assert len(res.metrics.updates) >= 1
    assert res.metrics.config_hash


def test_train_is_deterministic(tiny_cfg, prior):
    a = train(tiny_cfg, prior=prior)
    b = train(tiny_cfg, prior=prior)
    assert a.metrics.evals == b.metrics.evals
    assert a.metrics.updates == b.metrics.updates
    assert np.array_equal(a.learner.actor.params, b.learner.actor.params)


def test_train_moves_actor_away_from_prior(tiny_cfg, prior):
    res = train(tiny_cfg, prior=prior)
    assert not np.array_equal(res.learner.actor.params, prior.actor.params)


def test_zero_budget_evaluates_prior_only(tiny_cfg, prior):
    res = train(tiny_cfg.replace(budget=0), prior=prior)
    assert len(res.metrics.evals) == 1
    assert res.env_ticks == 0
    assert res.metrics.updates == []
    assert set(res.latents) == {"prior"}


def test_empty_rollout_stops_training(tiny_cfg, prior, caplog):
    with caplog.at_level(logging.WARNING):
        res = train(tiny_cfg.replace(t_rollout=0), prior=prior)
    assert "Collecte vide" in caplog.text
    assert res.env_ticks == 0
    assert len(res.metrics.evals) == 1


def test_zero_learning_rates_keep_prior(tiny_cfg, prior):
    res = train(tiny_cfg.replace(actor_lr=0.0, critic_lr=0.0), prior=prior)
    assert np.array_equal(res.learner.actor.params, prior.actor.params)
    for critic, target in zip(res.learner.critics.critics, res.learner.critics.targets):
        assert np.array_equal(critic.params, target.params)


def test_synchronized_and_cache_consistent(tiny_cfg, prior):
    res = train(tiny_cfg, prior=prior)
    assert np.array_equal(res.learner.actor_old.params, res.learner.actor.params)
    assert check_cache_integrity(res.buffer, res.snapshots, res.learner.actor)


def test_cache_integrity_detects_tampering(tiny_cfg, prior):
    res = train(tiny_cfg, prior=prior)
    rid = res.buffer.rollout_ids[-1]
    snapshots = dict(res.snapshots)
    snapshots[rid] = snapshots[rid] + 1e-3
    assert not check_cache_integrity(res.buffer, snapshots, res.learner.actor)


def test_buffer_keeps_most_recent_rollouts(tiny_cfg, prior):
    res = train(tiny_cfg.replace(budget=160, window=2), prior=prior)
    last = res.metrics.updates[-1]["phase"]
    assert last >= 3
    assert res.buffer.rollout_ids == [last - 1, last]
    assert sorted(res.snapshots) == [last - 1, last]


def test_single_critic_ablation(tiny_cfg, prior):
    res = train(tiny_cfg.replace(single_critic=True), prior=prior)
    assert res.learner.critics.n_members == 1


def test_non_finite_prior_raises_with_dump(tiny_cfg, prior, tmp_path):
    bad = Prior(prior.actor.with_params(np.full_like(prior.actor.params, np.nan)), prior.decoder, [], 0.0)
    with pytest.raises(TrainingError) as exc:
        train(tiny_cfg, out_dir=tmp_path, prior=bad)
    assert exc.value.dump_path == tmp_path / "crash_dump.npz"
    assert exc.value.dump_path.is_file()
    assert exc.value.algo == "fpo"


def test_prior_type_must_match_algo(tiny_cfg, prior):
    with pytest.raises(ValueError, match="incompatible"):
        train(tiny_cfg.replace(algo="gppo"), prior=prior)


def test_resumed_critics_are_copied_with_cfg_discounts(tiny_cfg, prior):
    trained = train(tiny_cfg, prior=prior).learner.critics
    cfg = tiny_cfg.replace(budget=0, gamma=0.9, lam=0.5)
    res = train(cfg, prior=prior._replace(critics=trained))
    critics = res.learner.critics
    assert critics is not trained
    assert (critics.gamma, critics.lam, critics.tau_polyak) == (0.9, 0.5, cfg.tau_polyak)
    for mine, theirs in zip(critics.critics + critics.targets, trained.critics + trained.targets):
        assert np.array_equal(mine.params, theirs.params)


def test_resumed_critics_must_match_member_count(tiny_cfg, prior):
    trained = train(tiny_cfg, prior=prior).learner.critics
    with pytest.raises(ValueError, match="critiques"):
        train(tiny_cfg.replace(single_critic=True), prior=prior._replace(critics=trained))


@pytest.mark.slow
def test_fpo_improves_calibrated_prior_on_pointreach():
    cfg = TrainerConfig()
    gains, prior_lengths, final_lengths = [], [], []
    for seed in range(5):
        res = train(cfg, prior=build_prior(cfg, seed), seed=seed)
        first, last = res.metrics.evals[0], res.metrics.evals[-1]
        gains.append(last["success_rate"] - first["success_rate"])
        prior_lengths.append(first["mean_length"])
        final_lengths.append(last["mean_length"])
    assert np.median(gains) >= 0.20
    assert np.median(final_lengths) < np.median(prior_lengths)


@pytest.mark.slow
def test_expert_prior_solves_pointreach():
    cfg = TrainerConfig().replace(demo_quality="expert")
    prior = build_prior(cfg)
    ev = evaluate(configure_actor(prior.actor, cfg), prior.decoder, cfg, cfg.seed, 50)
    assert ev.success_rate == 1.0


@pytest.mark.slow
def test_calibrated_prior_success_in_band():
    cfg = TrainerConfig()
    prior = build_prior(cfg)
    ev = evaluate(configure_actor(prior.actor, cfg), prior.decoder, cfg, cfg.seed, 50)
    assert 0.3 <= ev.success_rate <= 0.5
