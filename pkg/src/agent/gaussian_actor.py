"""
# Politique latente gaussienne diagonale.

Référence à densité exacte: la moyenne est un perceptron de l'état, le
log-écart-type est un vecteur indépendant de l'état. Le vecteur plat des
paramètres est [paramètres de la moyenne, log_std].
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from src.numkit.mlp import Mlp, NonFiniteError, init_mlp, mlp_backward, mlp_forward

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianActor:
    """π(x | s) = N(μ(s), diag(exp(log_std))²).

    Attributes
    ----------
    net: Mlp
        Réseau de la moyenne, entrée d, sortie D.
    log_std: np.ndarray
        Log-écarts-types (D,).
    stochastic: bool
        False pour renvoyer la moyenne (évaluation).
    """

    net: Mlp
    log_std: np.ndarray
    stochastic: bool = True

    def __post_init__(self):
        self.log_std = np.asarray(self.log_std, dtype=np.float64)
        if self.log_std.shape != (self.net.out_dim,):
            raise ValueError(
                f"log_std de forme {self.log_std.shape}, attendu ({self.net.out_dim},)"
            )

    @property
    def state_dim(self) -> int:
        return self.net.in_dim

    @property
    def latent_dim(self) -> int:
        return self.net.out_dim

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.net.params, self.log_std])

    def with_params(self, params: np.ndarray) -> "GaussianActor":
        n = self.net.params.size
        net = Mlp(self.net.layer_sizes, self.net.activation, params[:n].copy())
        return replace(self, net=net, log_std=params[n:].copy())

    def copy(self) -> "GaussianActor":
        return self.with_params(self.params)

    def deterministic(self) -> "GaussianActor":
        return replace(self.copy(), stochastic=False)

    def draw_latents(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        mean = mlp_forward(self.net, states)
        if not self.stochastic:
            return mean
        return mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)

    def act(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.draw_latents(states, rng)


def make_gaussian_actor(
    state_dim: int,
    latent_dim: int,
    hidden: Sequence[int],
    rng: np.random.Generator,
    activation: str = "tanh",
    init_log_std: float = -1.0,
) -> GaussianActor:
    net = init_mlp((state_dim, *hidden, latent_dim), rng, activation)
    return GaussianActor(net, np.full(latent_dim, init_log_std))


def log_prob(actor: GaussianActor, s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log π(x | s) par élément, (n,)."""
    lp, _ = log_prob_and_grad(actor, s, x, None)
    return lp


def log_prob_and_grad(
    actor: GaussianActor,
    s: np.ndarray,
    x: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Log-densités du lot et gradient de Σ_i w_i log π(x_i | s_i).

    Le gradient n'est calculé que si `weights` est fourni.
    """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    mean = mlp_forward(actor.net, s)
    inv_std = np.exp(-actor.log_std)
    u = (x - mean) * inv_std
    lp = -0.5 * np.sum(u * u, axis=-1) - np.sum(actor.log_std) - 0.5 * actor.latent_dim * LOG_2PI
    if not np.all(np.isfinite(lp)):
        raise NonFiniteError("Log-densité gaussienne non finie")
    if weights is None:
        return lp, None
    w = np.asarray(weights, dtype=np.float64)[:, None]
    d_mean = w * u * inv_std
    g_net = mlp_backward(actor.net, s, d_mean).params
    g_log_std = np.sum(w * (u * u - 1.0), axis=0)
    return lp, np.concatenate([g_net, g_log_std])


def entropy(actor: GaussianActor) -> float:
    """Entropie différentielle de la gaussienne (indépendante de l'état)."""
    return float(np.sum(actor.log_std) + 0.5 * actor.latent_dim * (LOG_2PI + 1.0))
