"""
# Optimiseur Adam (avec correction du biais).

L'état est explicite et modifié en place par `adam_step` ; les paramètres
mis à jour sont renvoyés dans un nouveau tableau.
"""

from dataclasses import dataclass, field
import logging

import numpy as np


@dataclass
class AdamState:
    """État d'Adam pour un vecteur de paramètres.

    Attributes
    ----------
    m: np.ndarray
        Premier moment (nul au pas 0).
    v: np.ndarray
        Second moment (nul au pas 0).
    step: int
        Nombre de mises à jour effectuées.
    lr, beta1, beta2, eps: float
        Hyperparamètres.
    n_skipped: int
        Nombre d'appels ignorés à cause d'un gradient non fini.
    """

    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    n_skipped: int = field(default=0)


def adam_init(n: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Crée un état Adam aux accumulateurs nuls pour `n` paramètres."""
    return AdamState(m=np.zeros(n), v=np.zeros(n), lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Applique un pas d'Adam.

    Un gradient contenant une valeur non finie est ignoré: les paramètres sont
    renvoyés inchangés, le compteur de pas n'avance pas et `n_skipped` est
    incrémenté.

    Parameters
    ----------
    state: AdamState
        État de l'optimiseur, modifié en place.
    params: np.ndarray
        Paramètres courants (non modifiés).
    grads: np.ndarray
        Gradient de même forme.

    Returns
    -------
    new_params: np.ndarray
        Paramètres mis à jour.
    """
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"Formes incompatibles: params {params.shape}, grads {grads.shape}, état {state.m.shape}"
        )
    if not np.all(np.isfinite(grads)):
        state.n_skipped += 1
        logging.warning(
            f"Adam: gradient non fini, mise à jour ignorée ({state.n_skipped} au total)"
        )
        return params.copy()
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
