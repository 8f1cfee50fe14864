"""
# Phase de mise à jour.

Avantages GAE calculés une fois par phase sur le tampon ordonné (critiques
courants), puis K_update pas internes:

1. tirage d'un lot dans le tampon ;
2. critiques: cible TD conservatrice, erreur quadratique, Adam, Polyak ;
3. acteur: pas propre à l'algorithme (FPO: ratio issu de la baisse de perte
   CFM et surrogate tronqué), sur des avantages standardisés dans le lot.

θ_old ← θ à la fin de la phase.
"""

from dataclasses import dataclass
import logging
from typing import Callable, Dict, List, NamedTuple, Tuple

import numpy as np

from src.agent.buffer import Transition, TrajectoryBuffer
from src.agent.flow_actor import actor_grad_from_ratio, cfm_losses, stack_draws
from src.agent.ratio_engine import (
    clipped_surrogate,
    loss_drop,
    ratio_grads,
    standardize_advantages,
    standardize_and_map,
)
from src.agent.value_ensemble import (
    ValueEnsemble,
    critic_loss,
    gae,
    polyak_update,
    td_targets,
    value_baseline,
)
from src.envlab.base_decoder import BaseDecoder
from src.numkit.adam import AdamState, adam_init, adam_step
from src.numkit.mlp import clip_grad_norm


@dataclass
class Learner:
    """Tout l'état mutable de l'apprentissage.

    Attributes
    ----------
    actor: FlowActor or GaussianActor
        Politique courante θ.
    actor_old: FlowActor or GaussianActor
        Politique de collecte θ_old.
    critics: ValueEnsemble
        Critiques et cibles.
    decoder: BaseDecoder
        Décodeur de base gelé.
    actor_opt: AdamState
        Optimiseur de l'acteur.
    critic_opts: list of AdamState
        Un optimiseur par critique.
    """

    actor: object
    actor_old: object
    critics: ValueEnsemble
    decoder: BaseDecoder
    actor_opt: AdamState
    critic_opts: List[AdamState]

    def sync(self) -> None:
        """θ_old ← θ."""
        self.actor_old = self.actor.copy()

    @property
    def n_skipped(self) -> int:
        return self.actor_opt.n_skipped + sum(o.n_skipped for o in self.critic_opts)


def make_learner(actor, critics: ValueEnsemble, decoder: BaseDecoder, actor_lr: float, critic_lr: float) -> Learner:
    return Learner(
        actor=actor,
        actor_old=actor.copy(),
        critics=critics,
        decoder=decoder,
        actor_opt=adam_init(actor.params.size, lr=actor_lr),
        critic_opts=[adam_init(c.params.size, lr=critic_lr) for c in critics.critics],
    )


class UpdateStats(NamedTuple):
    n_steps: int
    actor_loss: float
    critic_loss: float
    mean_rho: float
    clip_fraction: float
    mean_delta: float
    adv_mean: float
    adv_std: float
    actor_grad_norm: float
    critic_grad_norm: float
    entropy: float
    n_skipped: int


def transition_key(tr: Transition) -> Tuple[int, int]:
    return tr.rollout_id, tr.step_index


def compute_advantages(
    buffer: TrajectoryBuffer,
    critics: ValueEnsemble,
    actor,
    rng: np.random.Generator,
) -> Dict[Tuple[int, int], float]:
    """Avantages GAE de toutes les transitions retenues, par segment temporel.

    V(s_t) = min des cibles en (s_t, x_t) avec le latent stocké ; à la fin d'un
    segment non terminal (troncature ou fin de collecte), l'amorçage utilise
    V(s_next) avec un latent frais tiré de la politique courante.
    """
    advantages = {}
    for seg in buffer.segments():
        s = np.stack([tr.s for tr in seg])
        x = np.stack([tr.x for tr in seg])
        values = value_baseline(critics, s, x=x)
        last = seg[-1]
        boot = 0.0 if last.done else float(value_baseline(critics, last.s_next[None], actor, rng)[0])
        adv = gae(
            np.array([tr.r for tr in seg]),
            np.append(values, boot),
            np.array([tr.done for tr in seg]),
            critics.gamma,
            critics.lam,
        )
        for tr, a in zip(seg, adv):
            advantages[transition_key(tr)] = float(a)
    return advantages


def critic_step(learner: Learner, batch: List[Transition], rng: np.random.Generator, grad_clip: float) -> Tuple[float, float]:
    """Un pas sur les critiques, suivi de la moyenne de Polyak des cibles."""
    s = np.stack([tr.s for tr in batch])
    x = np.stack([tr.x for tr in batch])
    y = td_targets(
        learner.critics,
        np.array([tr.r for tr in batch]),
        np.stack([tr.s_next for tr in batch]),
        np.array([tr.done for tr in batch]),
        learner.actor,
        rng,
    )
    loss, grads = critic_loss(learner.critics, s, x, y)
    norms = []
    for critic, opt, grad in zip(learner.critics.critics, learner.critic_opts, grads):
        grad, norm = clip_grad_norm(grad, grad_clip)
        norms.append(norm)
        critic.params = adam_step(opt, critic.params, grad)
    polyak_update(learner.critics)
    return loss, float(np.max(norms))


def fpo_actor_step(learner: Learner, batch: List[Transition], adv: np.ndarray, cfg) -> Dict[str, float]:
    """Pas FPO: Δℓ = ℓ(θ_old) - ℓ(θ) sur les tirages figés, ρ = exp(β z), surrogate tronqué."""
    s = np.stack([tr.s for tr in batch])
    x = np.stack([tr.x for tr in batch])
    x0, tau = stack_draws([tr.draws for tr in batch])
    l_old = cfm_losses(learner.actor_old, s, x, x0, tau)
    l_new = cfm_losses(learner.actor, s, x, x0, tau)
    ratio = standardize_and_map(loss_drop(l_old, l_new), cfg.beta, cfg.sigma_floor, cfg.z_max)
    # ablation no_ratio: ρ ≡ 1, l'acteur ne reçoit plus de gradient
    rho = np.ones_like(ratio.rho) if cfg.no_ratio else ratio.rho
    loss, grad_rho, clip_fraction = clipped_surrogate(rho, adv, cfg.eps_clip, clip=not cfg.no_clip)
    dl = np.zeros_like(rho) if cfg.no_ratio else ratio_grads(ratio, grad_rho)
    grad = actor_grad_from_ratio(learner.actor, batch, dl)
    grad, norm = clip_grad_norm(grad, cfg.grad_clip)
    learner.actor = learner.actor.with_params(adam_step(learner.actor_opt, learner.actor.params, grad))
    return {
        "actor_loss": loss,
        "mean_rho": float(np.mean(rho)),
        "clip_fraction": clip_fraction,
        "mean_delta": float(np.mean(ratio.delta)),
        "actor_grad_norm": norm,
        "entropy": 0.0,
    }


ActorStep = Callable[[Learner, List[Transition], np.ndarray, object], Dict[str, float]]


def update_phase(
    learner: Learner,
    buffer: TrajectoryBuffer,
    cfg,
    rng: np.random.Generator,
    actor_step: ActorStep = fpo_actor_step,
) -> UpdateStats:
    """K_update pas internes (critiques puis acteur), puis θ_old ← θ.

    Parameters
    ----------
    learner: Learner
        État de l'apprentissage, modifié en place.
    buffer: TrajectoryBuffer
        Tampon non vide.
    cfg: TrainerConfig
        Hyperparamètres (k_update, batch_size, grad_clip, ...).
    rng: np.random.Generator
        Flux de la mise à jour.
    actor_step: callable
        Pas de l'acteur (FPO par défaut).

    Returns
    -------
    stats: UpdateStats
        Moyennes sur les pas internes.
    """
    if len(buffer) == 0:
        raise ValueError("Tampon vide")
    records = []
    adv_all = np.zeros(0)
    if cfg.k_update > 0:
        advantages = compute_advantages(buffer, learner.critics, learner.actor, rng)
        adv_all = np.array(list(advantages.values()))
    for _ in range(cfg.k_update):
        batch = buffer.sample_batch(cfg.batch_size, rng)
        c_loss, c_norm = critic_step(learner, batch, rng, cfg.grad_clip)
        adv, _ = standardize_advantages(
            np.array([advantages[transition_key(tr)] for tr in batch]), cfg.sigma_floor
        )
        rec = actor_step(learner, batch, adv, cfg)
        rec["critic_loss"] = c_loss
        rec["critic_grad_norm"] = c_norm
        records.append(rec)
    learner.sync()

    def avg(key):
        return float(np.mean([r[key] for r in records])) if records else 0.0

    stats = UpdateStats(
        n_steps=len(records),
        actor_loss=avg("actor_loss"),
        critic_loss=avg("critic_loss"),
        mean_rho=avg("mean_rho"),
        clip_fraction=avg("clip_fraction"),
        mean_delta=avg("mean_delta"),
        adv_mean=float(np.mean(adv_all)) if adv_all.size else 0.0,
        adv_std=float(np.std(adv_all)) if adv_all.size else 0.0,
        actor_grad_norm=avg("actor_grad_norm"),
        critic_grad_norm=avg("critic_grad_norm"),
        entropy=avg("entropy"),
        n_skipped=learner.n_skipped,
    )
    logging.debug(
        f"Mise à jour: {stats.n_steps} pas, ρ moyen {stats.mean_rho:.4f}, "
        f"troncature {stats.clip_fraction:.3f}, perte critique {stats.critic_loss:.4g}"
    )
    return stats
