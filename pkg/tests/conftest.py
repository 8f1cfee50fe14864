import numpy as np
import pytest

from src.trainer.config import TrainerConfig


@pytest.fixture
def tiny_cfg() -> TrainerConfig:
    """Configuration réduite: petits réseaux, budget de quelques phases."""
    return TrainerConfig().replace(
        actor_hidden=[16],
        critic_hidden=[16],
        decoder_hidden=[16],
        n_envs=2,
        horizon=20,
        t_rollout=8,
        k_update=2,
        batch_size=8,
        window=2,
        budget=64,
        eval_interval=32,
        eval_episodes=3,
        n_sample_steps=2,
        m_draws=2,
        demo_episodes=4,
        bc_epochs=2,
        bc_batch_size=32,
        seeds=[0, 1, 2],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
