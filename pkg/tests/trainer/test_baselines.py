import numpy as np
import pytest

from src.agent.buffer import TrajectoryBuffer
from src.agent.gaussian_actor import GaussianActor, entropy, make_gaussian_actor
from src.agent.value_ensemble import make_value_ensemble
from src.envlab.base_decoder import make_decoder
from src.envlab.envs import make_env
from src.numkit.rng import make_rng
from src.trainer.baselines import gppo_actor_step, rwfm_weights
from src.trainer.fpo import build_prior, train_baseline_gaussian_ppo, train_baseline_rwfm
from src.trainer.rollout import make_env_pool, rollout_phase
from src.trainer.update import make_learner


def test_rwfm_weights_mean_one():
    adv = make_rng(0).normal(size=32)
    w = rwfm_weights(adv, 0.5)
    assert np.mean(w) == pytest.approx(1.0)
    assert np.all(w > 0)
    order = np.argsort(adv)
    assert np.all(np.diff(w[order]) > 0)


def test_rwfm_weights_uniform_for_equal_advantages():
    assert np.allclose(rwfm_weights(np.full(5, 2.0), 1.0), 1.0)


def test_rwfm_weights_large_advantages_stay_finite():
    w = rwfm_weights(np.array([0.0, 1e4]), 1.0)
    assert np.all(np.isfinite(w))
    assert w[1] == pytest.approx(2.0)


@pytest.mark.parametrize("temperature", [0.0, -1.0])
def test_rwfm_weights_reject_temperature(temperature):
    with pytest.raises(ValueError):
        rwfm_weights(np.zeros(3), temperature)


def test_gppo_first_step_exact_unit_ratio(tiny_cfg):
    env = make_env(tiny_cfg.env, chunk_len=tiny_cfg.chunk_len, horizon=tiny_cfg.horizon)
    actor = make_gaussian_actor(env.state_dim, env.latent_dim, (8,), make_rng(0))
    critics = make_value_ensemble(env.state_dim, env.latent_dim, (8,), 2, make_rng(1))
    decoder = make_decoder("identity", env.state_dim, tiny_cfg.chunk_len, env.action_dim)
    learner = make_learner(actor, critics, decoder, 1e-2, 1e-3)
    buffer = TrajectoryBuffer(2, require_draws=False)
    transitions, _ = rollout_phase(learner.actor_old, decoder, make_env_pool(tiny_cfg, 0), 8, make_rng(2), 1)
    buffer.push_rollout(transitions)
    adv = make_rng(3).normal(size=8)
    rec = gppo_actor_step(learner, buffer.transitions(), adv, tiny_cfg)
    assert rec["mean_rho"] == 1.0
    assert rec["clip_fraction"] == 0.0
    assert rec["actor_grad_norm"] > 0.0
    assert not np.array_equal(learner.actor.params, actor.params)
    assert rec["entropy"] == entropy(learner.actor)


def test_rwfm_training_run(tiny_cfg):
    res = train_baseline_rwfm(tiny_cfg)
    assert res.metrics.evals[-1]["env_ticks"] >= tiny_cfg.budget
    assert all(row["mean_rho"] == 1.0 for row in res.metrics.updates)
    assert all(row["clip_fraction"] == 0.0 for row in res.metrics.updates)


def test_gaussian_ppo_training_run(tiny_cfg):
    cfg = tiny_cfg.replace(algo="gppo")
    res = train_baseline_gaussian_ppo(cfg, prior=build_prior(cfg))
    assert isinstance(res.learner.actor, GaussianActor)
    assert res.metrics.evals[-1]["env_ticks"] >= tiny_cfg.budget
    assert all(np.isfinite(row["entropy"]) for row in res.metrics.updates)
    assert all(tr.draws == () for tr in res.buffer.transitions())
