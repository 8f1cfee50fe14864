import numpy as np
import pytest

from src.agent.flow_actor import cfm_loss, make_flow_actor
from src.agent.gaussian_actor import log_prob, make_gaussian_actor
from src.envlab.base_decoder import make_decoder
from src.envlab.envs import make_env
from src.numkit.rng import make_rng
from src.trainer.rollout import EnvPool, evaluate, make_env_pool, rollout_phase


@pytest.fixture
def setup(tiny_cfg):
    env = make_env(tiny_cfg.env, chunk_len=tiny_cfg.chunk_len, horizon=tiny_cfg.horizon)
    actor = make_flow_actor(env.state_dim, env.latent_dim, (16,), make_rng(0, "init"), n_sample_steps=2)
    decoder = make_decoder("identity", env.state_dim, tiny_cfg.chunk_len, env.action_dim)
    return env, actor, decoder


def test_collects_exactly_t_rollout_steps(tiny_cfg, setup):
    _, actor, decoder = setup
    pool = make_env_pool(tiny_cfg, 0)
    transitions, stats = rollout_phase(actor, decoder, pool, 7, make_rng(0, "rollout"), 1, m_draws=3)
    assert len(transitions) == stats.n_steps == 7
    assert [tr.step_index for tr in transitions] == list(range(7))
    assert [tr.env_index for tr in transitions] == [0, 1, 0, 1, 0, 1, 0]
    assert all(tr.rollout_id == 1 for tr in transitions)
    assert all(len(tr.draws) == 3 for tr in transitions)
    assert 0 < stats.n_ticks <= 7 * tiny_cfg.chunk_len


def test_zero_steps_returns_nothing(tiny_cfg, setup):
    _, actor, decoder = setup
    transitions, stats = rollout_phase(actor, decoder, make_env_pool(tiny_cfg, 0), 0, make_rng(0), 1)
    assert transitions == []
    assert stats.n_steps == 0 and stats.n_episodes == 0


def test_cached_loss_matches_collection_policy(tiny_cfg, setup):
    _, actor, decoder = setup
    transitions, _ = rollout_phase(actor, decoder, make_env_pool(tiny_cfg, 0), 8, make_rng(1), 1, m_draws=2)
    for tr in transitions:
        assert cfm_loss(actor, tr.s, tr.x, tr.draws) == tr.l_init


def test_actions_are_decoded_latents(tiny_cfg, setup):
    _, actor, decoder = setup
    transitions, _ = rollout_phase(actor, decoder, make_env_pool(tiny_cfg, 0), 4, make_rng(2), 1)
    for tr in transitions:
        assert np.array_equal(tr.a, np.clip(tr.x, -1.0, 1.0))


def test_pool_state_persists_between_rollouts(tiny_cfg, setup):
    _, actor, decoder = setup
    pool = make_env_pool(tiny_cfg, 0)
    rng = make_rng(3)
    first, _ = rollout_phase(actor, decoder, pool, 2, rng, 1)
    second, _ = rollout_phase(actor, decoder, pool, 2, rng, 2)
    for a, b in zip(first, second):
        if not a.episode_end:
            assert np.array_equal(b.s, a.s_next)


def test_same_seed_same_rollout(tiny_cfg, setup):
    _, actor, decoder = setup
    runs = [
        rollout_phase(actor, decoder, make_env_pool(tiny_cfg, 5), 6, make_rng(5, "rollout"), 1)[0]
        for _ in range(2)
    ]
    for a, b in zip(*runs):
        assert np.array_equal(a.x, b.x)
        assert a.l_init == b.l_init
        assert a.r == b.r


def test_pool_requires_one_rng_per_env():
    with pytest.raises(ValueError):
        EnvPool([make_env("pointreach")], [])


def test_gaussian_reference_is_log_density(tiny_cfg):
    env = make_env(tiny_cfg.env, chunk_len=tiny_cfg.chunk_len, horizon=tiny_cfg.horizon)
    actor = make_gaussian_actor(env.state_dim, env.latent_dim, (8,), make_rng(0))
    decoder = make_decoder("identity", env.state_dim, tiny_cfg.chunk_len, env.action_dim)
    transitions, _ = rollout_phase(actor, decoder, make_env_pool(tiny_cfg, 0), 4, make_rng(1), 1)
    for tr in transitions:
        assert tr.draws == ()
        assert tr.l_init == pytest.approx(float(log_prob(actor, tr.s[None], tr.x[None])[0]), abs=1e-12)


def test_evaluate_is_deterministic(tiny_cfg, setup):
    _, actor, decoder = setup
    a = evaluate(actor, decoder, tiny_cfg, 0, 3)
    b = evaluate(actor, decoder, tiny_cfg, 0, 3)
    assert a.success_rate == b.success_rate
    assert a.mean_return == b.mean_return
    assert len(a.latents) == 3
    for la, lb in zip(a.latents, b.latents):
        assert np.array_equal(la, lb)
        assert la.shape[1] == actor.latent_dim


def test_evaluate_episode_lengths_bounded(tiny_cfg, setup):
    _, actor, decoder = setup
    res = evaluate(actor, decoder, tiny_cfg, 1, 4)
    assert 0 < res.mean_length <= tiny_cfg.horizon
    assert len(res.successes) == 4
    assert res.success_rate == pytest.approx(np.mean(res.successes))
