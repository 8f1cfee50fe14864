"""
# Pas d'acteur des algorithmes de référence.

* rwfm: régression CFM pondérée par la récompense, w_i ∝ exp(Â_i / température),
  sans ratio ni troncature ;
* gppo: PPO classique sur une politique latente gaussienne diagonale, avec
  rapport d'importance exact exp(log π_θ - log π_old).

Les deux utilisent la même collecte, les mêmes critiques et les mêmes
avantages que FPO.
"""

from typing import Dict, List

import numpy as np

from src.agent.buffer import Transition
from src.agent.flow_actor import cfm_losses_and_grad, stack_draws
from src.agent.gaussian_actor import entropy, log_prob, log_prob_and_grad
from src.agent.ratio_engine import clipped_surrogate
from src.numkit.adam import adam_step
from src.numkit.mlp import clip_grad_norm

# borne de la différence de log-densités dans l'exponentielle
MAX_LOG_RATIO = 20.0


def rwfm_weights(adv: np.ndarray, temperature: float) -> np.ndarray:
    """Poids n · softmax(Â / température): moyenne 1, uniformes si les avantages sont égaux."""
    if temperature <= 0:
        raise ValueError(f"La température doit être > 0: {temperature}")
    adv = np.asarray(adv, dtype=np.float64)
    logits = adv / temperature
    w = np.exp(logits - np.max(logits))
    return adv.size * w / np.sum(w)


def rwfm_actor_step(learner, batch: List[Transition], adv: np.ndarray, cfg) -> Dict[str, float]:
    """Minimise mean(w_i · ℓ_cfm,i) sur les tirages figés des transitions."""
    s = np.stack([tr.s for tr in batch])
    x = np.stack([tr.x for tr in batch])
    x0, tau = stack_draws([tr.draws for tr in batch])
    w = rwfm_weights(adv, cfg.rwfm_temperature)
    losses, grad = cfm_losses_and_grad(learner.actor, s, x, x0, tau, weights=w / w.size)
    grad, norm = clip_grad_norm(grad, cfg.grad_clip)
    learner.actor = learner.actor.with_params(adam_step(learner.actor_opt, learner.actor.params, grad))
    return {
        "actor_loss": float(np.mean(w * losses)),
        "mean_rho": 1.0,
        "clip_fraction": 0.0,
        "mean_delta": 0.0,
        "actor_grad_norm": norm,
        "entropy": 0.0,
    }


def gppo_actor_step(learner, batch: List[Transition], adv: np.ndarray, cfg) -> Dict[str, float]:
    """PPO tronqué avec le rapport exact π_θ(x|s) / π_old(x|s)."""
    s = np.stack([tr.s for tr in batch])
    x = np.stack([tr.x for tr in batch])
    lp_old = log_prob(learner.actor_old, s, x)
    lp_new = log_prob(learner.actor, s, x)
    log_ratio = np.clip(lp_new - lp_old, -MAX_LOG_RATIO, MAX_LOG_RATIO)
    rho = np.exp(log_ratio)
    loss, grad_rho, clip_fraction = clipped_surrogate(rho, adv, cfg.eps_clip, clip=not cfg.no_clip)
    active = np.abs(lp_new - lp_old) < MAX_LOG_RATIO
    _, grad = log_prob_and_grad(learner.actor, s, x, weights=np.where(active, grad_rho * rho, 0.0))
    grad, norm = clip_grad_norm(grad, cfg.grad_clip)
    learner.actor = learner.actor.with_params(adam_step(learner.actor_opt, learner.actor.params, grad))
    return {
        "actor_loss": loss,
        "mean_rho": float(np.mean(rho)),
        "clip_fraction": clip_fraction,
        "mean_delta": float(np.mean(lp_new - lp_old)),
        "actor_grad_norm": norm,
        "entropy": entropy(learner.actor),
    }
