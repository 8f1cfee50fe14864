"""
# Ratio sans vraisemblance et surrogate PPO tronqué.

Δℓ = ℓ_old - ℓ_new mesure l'amélioration de la perte CFM sur un même échantillon
(mêmes tirages figés). Les Δℓ d'un minibatch sont standardisés (statistiques du
minibatch seul, écart-type de population), puis ρ = exp(β·z) remplace le rapport
d'importance π_θ/π_θ_old dans l'objectif tronqué de PPO.

Les statistiques du minibatch (μ_Δ, σ_Δ) sont traitées comme des constantes
pour la dérivation: seul ℓ_new dépend de θ.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.numkit.mlp import NonFiniteError

SIGMA_FLOOR = 1e-8
Z_MAX = 5.0


@dataclass(frozen=True)
class RatioBatch:
    """Ratios d'un minibatch.

    Attributes
    ----------
    delta: np.ndarray
        Δℓ par élément.
    mu: float
        Moyenne de Δℓ sur le minibatch.
    sigma: float
        Écart-type (population) de Δℓ sur le minibatch.
    z: np.ndarray
        Δℓ standardisé (nul si sigma < sigma_floor).
    rho: np.ndarray
        exp(β · clip(z, ±z_max)), strictement positif.
    beta: float
        Raideur de la transformation.
    sigma_floor: float
        Seuil sous lequel z est forcé à 0.
    z_max: float
        Borne de |z| dans l'exponentielle.
    """

    delta: np.ndarray
    mu: float
    sigma: float
    z: np.ndarray
    rho: np.ndarray
    beta: float
    sigma_floor: float = SIGMA_FLOOR
    z_max: float = Z_MAX

    @property
    def floored(self) -> bool:
        return self.sigma < self.sigma_floor

    def drho_dnew(self) -> np.ndarray:
        """∂ρ_i/∂ℓ_new,i = ρ · β · (-1/σ), nul là où la borne z_max est active.

        Sous le plancher (lot tout juste synchronisé, Δℓ ≡ 0), σ est pris égal
        à 1: ρ vaut 1 mais le gradient reste celui de exp(β Δℓ).
        """
        scale = 1.0 if self.floored else self.sigma
        active = np.abs(self.z) <= self.z_max
        return np.where(active, -self.rho * self.beta / scale, 0.0)


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("Entrée non finie dans le calcul du ratio")


def loss_drop(l_old, l_new):
    """Δℓ = ℓ_old - ℓ_new (positif si la perte a diminué)."""
    l_old = np.asarray(l_old, dtype=np.float64)
    l_new = np.asarray(l_new, dtype=np.float64)
    _check_finite(l_old, l_new)
    delta = l_old - l_new
    return float(delta) if delta.ndim == 0 else delta


def standardize_and_map(
    delta: np.ndarray,
    beta: float,
    sigma_floor: float = SIGMA_FLOOR,
    z_max: float = Z_MAX,
) -> RatioBatch:
    """Standardise les Δℓ du minibatch et calcule ρ = exp(β z).

    Parameters
    ----------
    delta: np.ndarray
        Δℓ par élément, non vide.
    beta: float
        Raideur (>= 0).
    sigma_floor: float, defaults to 1e-8
        Si σ_Δ < sigma_floor, z = 0 et ρ = 1.
    z_max: float, defaults to 5.0
        Borne de |z| appliquée avant l'exponentielle.

    Returns
    -------
    batch: RatioBatch
        Statistiques, z et ρ.
    """
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.size == 0:
        raise ValueError("Minibatch de Δℓ vide")
    _check_finite(delta)
    mu = float(np.mean(delta))
    sigma = float(np.std(delta))
    if sigma < sigma_floor:
        logging.debug(f"σ_Δ={sigma:.3g} sous le plancher, ρ = 1")
        z = np.zeros_like(delta)
    else:
        z = (delta - mu) / sigma
    rho = np.exp(beta * np.clip(z, -z_max, z_max))
    return RatioBatch(delta, mu, sigma, z, rho, float(beta), sigma_floor, z_max)


def clipped_surrogate(
    rho: np.ndarray, adv: np.ndarray, eps_clip: float, clip: bool = True
) -> Tuple[float, np.ndarray, float]:
    """Perte PPO tronquée: -mean(min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)).

    Parameters
    ----------
    rho: np.ndarray
        Ratios par élément.
    adv: np.ndarray
        Avantages (standardisés en amont).
    eps_clip: float
        Demi-largeur de la zone de confiance, dans (0, 1).
    clip: bool, defaults to True
        False pour la variante sans troncature (-mean(ρÂ)).

    Returns
    -------
    loss: float
        Valeur de la perte.
    grad_rho: np.ndarray
        ∂loss/∂ρ par élément: -Â/n sur la branche non tronquée, 0 sinon.
    clip_fraction: float
        Part des éléments dont la branche tronquée est active.
    """
    rho = np.asarray(rho, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    if rho.shape != adv.shape:
        raise ValueError(f"Formes incompatibles: ρ {rho.shape}, Â {adv.shape}")
    if not 0.0 < eps_clip < 1.0:
        raise ValueError(f"eps_clip hors de (0, 1): {eps_clip}")
    n = rho.size
    unclipped = rho * adv
    if clip:
        clipped = np.clip(rho, 1.0 - eps_clip, 1.0 + eps_clip) * adv
        # égalité: branche non tronquée
        use_unclipped = unclipped <= clipped
        terms = np.where(use_unclipped, unclipped, clipped)
    else:
        use_unclipped = np.ones(n, dtype=bool)
        terms = unclipped
    loss = -float(np.mean(terms))
    grad_rho = np.where(use_unclipped, -adv / n, 0.0)
    clip_fraction = float(np.mean(~use_unclipped)) if n else 0.0
    return loss, grad_rho, clip_fraction


def standardize_advantages(
    adv: np.ndarray, sigma_floor: float = SIGMA_FLOOR
) -> Tuple[np.ndarray, bool]:
    """Standardise les avantages d'un minibatch (moyenne 0, écart-type 1).

    Returns
    -------
    adv_std: np.ndarray
        Avantages standardisés ; nuls si le lot est constant.
    passed_through: bool
        True si le lot compte moins de 2 éléments (avantages inchangés).
    """
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size < 2:
        logging.warning(f"Minibatch de taille {adv.size}: avantages non standardisés")
        return adv.copy(), True
    sigma = float(np.std(adv))
    centered = adv - np.mean(adv)
    if sigma < sigma_floor:
        return np.zeros_like(adv), False
    return centered / sigma, False


def ratio_grads(batch: RatioBatch, grad_rho: np.ndarray) -> np.ndarray:
    """∂L_actor/∂ℓ_new par élément, par la règle de dérivation en chaîne."""
    return np.asarray(grad_rho, dtype=np.float64) * batch.drho_dnew()
