"""
# Clonage comportemental de l'a priori d'imitation.

L'acteur à flot minimise la perte CFM sur les paires (s, x = bloc d'actions
aplati) des démonstrations, avec des tirages (x0, τ) frais à chaque lot.
Le décodeur de base (mode "net") est entraîné conjointement à reconstruire le
bloc à partir de (s, x), puis gelé par l'appelant.

La variante gaussienne maximise la log-vraisemblance des mêmes paires.
"""

import logging
from typing import List, NamedTuple, Optional

import numpy as np
from tqdm import tqdm

from src.agent.flow_actor import FlowActor, cfm_losses, cfm_losses_and_grad, TAU_HIGH, TAU_LOW
from src.agent.gaussian_actor import GaussianActor, log_prob_and_grad
from src.envlab.base_decoder import BaseDecoder, decode_raw
from src.numkit.adam import adam_init, adam_step
from src.numkit.mlp import Mlp, NonFiniteError, clip_grad_norm, mlp_backward
from src.trainer.errors import TrainingError


class BcResult(NamedTuple):
    actor: object
    decoder: Optional[BaseDecoder]
    losses: List[float]  # perte moyenne par époque


def _draw_batch(rng: np.random.Generator, n: int, m: int, d_latent: int):
    x0 = rng.standard_normal((n, m, d_latent))
    tau = rng.uniform(TAU_LOW, TAU_HIGH, size=(n, m))
    return x0, tau


def _check_demos(states: np.ndarray, chunks: np.ndarray) -> None:
    if states.shape[0] == 0:
        raise ValueError("Jeu de démonstrations vide")
    if states.shape[0] != chunks.shape[0]:
        raise ValueError(f"{states.shape[0]} états pour {chunks.shape[0]} blocs d'actions")


def _trainable(decoder: Optional[BaseDecoder]) -> bool:
    return decoder is not None and decoder.mode == "net" and not decoder.frozen


def decoder_loss_and_grad(dec: BaseDecoder, s: np.ndarray, chunks: np.ndarray):
    """Erreur quadratique moyenne de reconstruction du bloc à partir de (s, x = bloc)."""
    inp = np.concatenate([s, chunks], axis=-1)
    err = decode_raw(dec, s, chunks) - chunks
    loss = float(np.mean(np.sum(err * err, axis=-1)))
    grad = mlp_backward(dec.net, inp, 2.0 * err / s.shape[0]).params
    return loss, grad


def bc_loss(
    actor: FlowActor,
    states: np.ndarray,
    chunks: np.ndarray,
    rng: np.random.Generator,
    m_draws: int = 4,
) -> float:
    """Perte CFM moyenne sur les démonstrations (tirages frais)."""
    x0, tau = _draw_batch(rng, states.shape[0], m_draws, actor.latent_dim)
    return float(np.mean(cfm_losses(actor, states, chunks, x0, tau)))


def pretrain_bc(
    actor: FlowActor,
    states: np.ndarray,
    chunks: np.ndarray,
    epochs: int,
    rng: np.random.Generator,
    lr: float = 1e-3,
    batch_size: int = 256,
    m_draws: int = 4,
    decoder: Optional[BaseDecoder] = None,
    grad_clip: float = 10.0,
) -> BcResult:
    """Entraîne l'a priori par régression CFM sur les démonstrations.

    Parameters
    ----------
    actor: FlowActor
        Acteur de départ (non modifié).
    states: np.ndarray
        États des démonstrations (n, d).
    chunks: np.ndarray
        Blocs d'actions aplatis (n, D), cibles latentes.
    epochs: int
        Nombre d'époques (0: acteur inchangé).
    rng: np.random.Generator
        Générateur des permutations et des tirages CFM.
    lr: float
        Pas d'Adam (0: paramètres inchangés).
    batch_size: int
        Taille des lots.
    m_draws: int
        Tirages CFM par échantillon.
    decoder: BaseDecoder, optional
        Décodeur à entraîner conjointement (mode "net", non gelé).
    grad_clip: float
        Norme maximale des gradients.

    Returns
    -------
    result: BcResult
        Acteur entraîné (nouvel objet), décodeur, pertes par époque.
    """
    states = np.asarray(states, dtype=np.float64)
    chunks = np.asarray(chunks, dtype=np.float64)
    _check_demos(states, chunks)
    actor = actor.copy()
    train_dec = _trainable(decoder)
    opt = adam_init(actor.params.size, lr=lr)
    dec_opt = adam_init(decoder.net.params.size, lr=lr) if train_dec else None
    n = states.shape[0]
    losses = []
    for epoch in tqdm(range(epochs), desc="BC", disable=None):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            x0, tau = _draw_batch(rng, idx.size, m_draws, actor.latent_dim)
            try:
                batch_losses, grad = cfm_losses_and_grad(
                    actor, states[idx], chunks[idx], x0, tau, weights=np.full(idx.size, 1.0 / idx.size)
                )
            except NonFiniteError as err:
                raise TrainingError(f"Perte BC non finie à l'époque {epoch}", algo="bc") from err
            grad, _ = clip_grad_norm(grad, grad_clip)
            actor = actor.with_params(adam_step(opt, actor.params, grad))
            total += float(np.sum(batch_losses))
            if train_dec:
                _, dgrad = decoder_loss_and_grad(decoder, states[idx], chunks[idx])
                dgrad, _ = clip_grad_norm(dgrad, grad_clip)
                decoder.net = Mlp(
                    decoder.net.layer_sizes,
                    decoder.net.activation,
                    adam_step(dec_opt, decoder.net.params, dgrad),
                )
        losses.append(total / n)
        logging.debug(f"BC époque {epoch}: perte CFM {losses[-1]:.6f}")
    if losses:
        logging.info(f"BC terminé: perte CFM {losses[0]:.4f} → {losses[-1]:.4f} ({epochs} époques)")
    return BcResult(actor, decoder, losses)


def pretrain_gaussian_bc(
    actor: GaussianActor,
    states: np.ndarray,
    chunks: np.ndarray,
    epochs: int,
    rng: np.random.Generator,
    lr: float = 1e-3,
    batch_size: int = 256,
    decoder: Optional[BaseDecoder] = None,
    grad_clip: float = 10.0,
) -> BcResult:
    """Maximum de vraisemblance de la politique gaussienne sur les démonstrations."""
    states = np.asarray(states, dtype=np.float64)
    chunks = np.asarray(chunks, dtype=np.float64)
    _check_demos(states, chunks)
    actor = actor.copy()
    train_dec = _trainable(decoder)
    opt = adam_init(actor.params.size, lr=lr)
    dec_opt = adam_init(decoder.net.params.size, lr=lr) if train_dec else None
    n = states.shape[0]
    losses = []
    for epoch in tqdm(range(epochs), desc="BC gaussien", disable=None):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            try:
                lp, grad = log_prob_and_grad(
                    actor, states[idx], chunks[idx], weights=np.full(idx.size, -1.0 / idx.size)
                )
            except NonFiniteError as err:
                raise TrainingError(f"Vraisemblance BC non finie à l'époque {epoch}", algo="bc") from err
            grad, _ = clip_grad_norm(grad, grad_clip)
            actor = actor.with_params(adam_step(opt, actor.params, grad))
            total -= float(np.sum(lp))
            if train_dec:
                _, dgrad = decoder_loss_and_grad(decoder, states[idx], chunks[idx])
                dgrad, _ = clip_grad_norm(dgrad, grad_clip)
                decoder.net = Mlp(
                    decoder.net.layer_sizes,
                    decoder.net.activation,
                    adam_step(dec_opt, decoder.net.params, dgrad),
                )
        losses.append(total / n)
        logging.debug(f"BC gaussien époque {epoch}: NLL {losses[-1]:.6f}")
    return BcResult(actor, decoder, losses)
