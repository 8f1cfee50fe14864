"""
# Collecte d'expérience et évaluation.

Les environnements parallèles avancent en pas synchronisés: à chaque pas de
politique, les états de tous les environnements actifs sont traités en un lot
(échantillonnage du latent, exploration, décodage), puis chaque environnement
exécute son bloc de H ticks.

Chaque transition mémorise la statistique de référence de la politique de
collecte θ_old:
* acteur à flot: la perte CFM ℓ_init sur des tirages (x0, τ) figés ;
* acteur gaussien: la log-densité log π_old(x | s) (aucun tirage).
"""

from dataclasses import dataclass, field
import logging
from typing import List, NamedTuple, Tuple

import numpy as np

from src.agent.buffer import Transition
from src.agent.flow_actor import FlowActor, cfm_loss, draw_cfm_samples
from src.agent.gaussian_actor import log_prob
from src.envlab.base_decoder import BaseDecoder, base_decode
from src.envlab.envs import Env, make_env
from src.numkit.mlp import NonFiniteError
from src.numkit.rng import make_rng


class RolloutStats(NamedTuple):
    n_steps: int
    n_ticks: int
    n_episodes: int  # épisodes terminés pendant la collecte
    success_rate: float
    mean_return: float


class EvalResult(NamedTuple):
    success_rate: float
    mean_return: float
    mean_length: float  # en ticks
    successes: List[bool]
    latents: List[np.ndarray]  # un tableau (pas, D) par épisode


@dataclass
class EnvPool:
    """Environnements parallèles de la collecte, chacun avec son propre flux aléatoire."""

    envs: List[Env]
    rngs: List[np.random.Generator]
    states: np.ndarray = field(init=False)
    ep_return: np.ndarray = field(init=False)
    ep_ticks: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.envs) != len(self.rngs) or not self.envs:
            raise ValueError("Un générateur par environnement est requis")
        self.states = np.stack([env.reset(rng) for env, rng in zip(self.envs, self.rngs)])
        self.ep_return = np.zeros(len(self.envs))
        self.ep_ticks = np.zeros(len(self.envs), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.envs)


def env_kwargs(cfg) -> dict:
    return dict(
        chunk_len=cfg.chunk_len,
        horizon=cfg.horizon,
        goal_tol=cfg.goal_tol,
        reward_mode=cfg.reward_mode,
    )


def make_env_pool(cfg, seed: int) -> EnvPool:
    envs = [make_env(cfg.env, **env_kwargs(cfg)) for _ in range(cfg.n_envs)]
    rngs = [make_rng(seed, "env", i) for i in range(cfg.n_envs)]
    return EnvPool(envs, rngs)


def reference_stats(
    actor_old, s: np.ndarray, x: np.ndarray, rng: np.random.Generator, m_draws: int
) -> Tuple[List[float], List[tuple]]:
    """Statistique de référence de θ_old (et tirages figés) pour chaque paire (s, x) du lot."""
    if isinstance(actor_old, FlowActor):
        draws = [draw_cfm_samples(rng, actor_old.latent_dim, m_draws) for _ in range(s.shape[0])]
        # perte évaluée élément par élément: même chemin de calcul que la vérification du cache
        l_init = [cfm_loss(actor_old, s[i], x[i], draws[i]) for i in range(s.shape[0])]
        return l_init, draws
    return [float(v) for v in log_prob(actor_old, s, x)], [() for _ in range(s.shape[0])]


def rollout_phase(
    actor_old,
    decoder: BaseDecoder,
    pool: EnvPool,
    t_rollout: int,
    rng: np.random.Generator,
    rollout_id: int,
    m_draws: int = 4,
) -> Tuple[List[Transition], RolloutStats]:
    """Collecte exactement `t_rollout` pas de politique avec la politique gelée θ_old.

    Parameters
    ----------
    actor_old: FlowActor or GaussianActor
        Politique de collecte (non modifiée).
    decoder: BaseDecoder
        Décodeur de base gelé.
    pool: EnvPool
        Environnements parallèles ; leur état persiste d'une collecte à l'autre.
    t_rollout: int
        Nombre de pas de politique à collecter, tous environnements confondus.
    rng: np.random.Generator
        Flux de la collecte (latents, exploration, tirages CFM).
    rollout_id: int
        Identifiant de la collecte.
    m_draws: int
        Tirages CFM figés par transition.

    Returns
    -------
    transitions: list of Transition
        Transitions, indices d'étape contigus à partir de 0.
    stats: RolloutStats
        Bilan de la collecte.
    """
    transitions = []
    n_ticks = 0
    finished = []
    while len(transitions) < t_rollout:
        k = min(len(pool), t_rollout - len(transitions))
        s = pool.states[:k].copy()
        x = actor_old.act(s, rng)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"Latent non fini pendant la collecte {rollout_id}")
        actions = base_decode(decoder, s, x)
        l_init, draws = reference_stats(actor_old, s, x, rng, m_draws)
        for i in range(k):
            env = pool.envs[i]
            res = env.step_chunk(actions[i])
            n_ticks += res.n_ticks
            pool.ep_return[i] += res.reward
            pool.ep_ticks[i] += res.n_ticks
            transitions.append(
                Transition(
                    s=s[i],
                    x=x[i],
                    a=actions[i].reshape(-1),
                    r=res.reward,
                    s_next=res.state,
                    done=res.done,
                    l_init=l_init[i],
                    draws=draws[i],
                    rollout_id=rollout_id,
                    step_index=len(transitions),
                    env_index=i,
                    truncated=res.truncated,
                )
            )
            if res.done or res.truncated:
                finished.append((res.success, pool.ep_return[i]))
                pool.ep_return[i] = 0.0
                pool.ep_ticks[i] = 0
                pool.states[i] = env.reset(pool.rngs[i])
            else:
                pool.states[i] = res.state
    stats = RolloutStats(
        n_steps=len(transitions),
        n_ticks=n_ticks,
        n_episodes=len(finished),
        success_rate=float(np.mean([f[0] for f in finished])) if finished else 0.0,
        mean_return=float(np.mean([f[1] for f in finished])) if finished else 0.0,
    )
    logging.debug(
        f"Collecte {rollout_id}: {stats.n_steps} pas, {stats.n_ticks} ticks, "
        f"{stats.n_episodes} épisodes terminés"
    )
    return transitions, stats


def evaluate(
    actor,
    decoder: BaseDecoder,
    cfg,
    seed: int,
    n_episodes: int,
) -> EvalResult:
    """Évaluation déterministe (sans exploration) sur `n_episodes` épisodes.

    Utilise ses propres environnements et son propre flux aléatoire, dérivé de
    la graine: mêmes états initiaux à chaque point d'évaluation, aucun effet sur
    les flux de l'entraînement.
    """
    actor = actor.deterministic()
    envs = [make_env(cfg.env, **env_kwargs(cfg)) for _ in range(n_episodes)]
    states = np.stack([env.reset(make_rng(seed, "eval", i)) for i, env in enumerate(envs)])
    rng = make_rng(seed, "eval")
    returns = np.zeros(n_episodes)
    lengths = np.zeros(n_episodes, dtype=np.int64)
    successes = [False] * n_episodes
    latents = [[] for _ in range(n_episodes)]
    active = [i for i, env in enumerate(envs) if not env.finished]
    while active:
        s = states[active]
        x = actor.act(s, rng)
        actions = base_decode(decoder, s, x)
        still = []
        for j, i in enumerate(active):
            latents[i].append(x[j])
            res = envs[i].step_chunk(actions[j])
            returns[i] += res.reward
            lengths[i] += res.n_ticks
            states[i] = res.state
            if res.done or res.truncated:
                successes[i] = res.success
            else:
                still.append(i)
        active = still
    d_latent = decoder.latent_dim
    return EvalResult(
        success_rate=float(np.mean(successes)),
        mean_return=float(np.mean(returns)),
        mean_length=float(np.mean(lengths)),
        successes=successes,
        latents=[np.array(lat) if lat else np.zeros((0, d_latent)) for lat in latents],
    )
