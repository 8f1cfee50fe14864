"""
# Acteur à flot conditionnel (flow matching).

Le champ de vitesse v_θ(x, τ | s) est un perceptron dont l'entrée est la
concaténation [s, x, τ] (dimension d + D + 1) et la sortie une vitesse de
dimension D.

* la perte CFM par échantillon utilise l'interpolation en ligne droite
  x_τ = (1 - τ) x0 + τ x1, de vitesse cible (x1 - x0), avec des tirages (x0, τ)
  figés à la collecte et réutilisés tels quels à chaque réévaluation ;
* l'échantillonnage intègre le champ de u = 0 à u = 1 par Euler explicite ;
* l'exploration applique K petits pas supplémentaires au latent obtenu.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from src.numkit.mlp import Mlp, NonFiniteError, init_mlp, mlp_backward, mlp_forward

# bornes des temps de flot tirés pour la perte CFM (extrémités exclues)
TAU_LOW = 0.02
TAU_HIGH = 0.98


class SamplingError(NonFiniteError):
    """État non fini pendant l'intégration d'Euler."""

    def __init__(self, step: int, msg: str = ""):
        self.step = step
        super().__init__(f"Échantillonnage: état non fini au pas {step}. {msg}".strip())


@dataclass(frozen=True)
class CfmSample:
    """Tirage Monte-Carlo figé de la perte CFM: bruit x0 et temps de flot τ."""

    x0: np.ndarray
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"Temps de flot hors de [0, 1]: {self.tau}")
        x0 = np.array(self.x0, dtype=np.float64)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)


@dataclass
class FlowActor:
    """Politique latente π_θ(x | s) définie par un champ de vitesse.

    Attributes
    ----------
    net: Mlp
        Champ de vitesse, entrée d + D + 1, sortie D.
    state_dim: int
        Dimension d de l'état.
    latent_dim: int
        Dimension D du latent.
    n_sample_steps: int
        Nombre de pas d'Euler de l'échantillonnage (>= 1).
    explore_steps: int
        Nombre K de pas d'exploration (>= 0).
    eta: float
        Taille des pas d'exploration (> 0).
    sigma_explore: float
        Écart-type du bruit ajouté à chaque pas d'exploration (>= 0).
    explore_tau: float
        Temps de flot auquel le champ est évalué pendant l'exploration.
    """

    net: Mlp
    state_dim: int
    latent_dim: int
    n_sample_steps: int = 8
    explore_steps: int = 4
    eta: float = 0.05
    sigma_explore: float = 0.05
    explore_tau: float = 1.0

    def __post_init__(self):
        if self.net.in_dim != self.state_dim + self.latent_dim + 1:
            raise ValueError(
                f"Entrée du champ de vitesse ({self.net.in_dim}) != d + D + 1 "
                f"({self.state_dim} + {self.latent_dim} + 1)"
            )
        if self.net.out_dim != self.latent_dim:
            raise ValueError(
                f"Sortie du champ de vitesse ({self.net.out_dim}) != D ({self.latent_dim})"
            )
        if self.n_sample_steps < 1:
            raise ValueError(f"n_sample_steps doit être >= 1: {self.n_sample_steps}")
        if self.explore_steps < 0:
            raise ValueError(f"explore_steps doit être >= 0: {self.explore_steps}")
        if self.eta <= 0:
            raise ValueError(f"eta doit être > 0: {self.eta}")
        if self.sigma_explore < 0:
            raise ValueError(f"sigma_explore doit être >= 0: {self.sigma_explore}")
        if not 0.0 <= self.explore_tau <= 1.0:
            raise ValueError(f"explore_tau hors de [0, 1]: {self.explore_tau}")

    @property
    def params(self) -> np.ndarray:
        return self.net.params

    def copy(self) -> "FlowActor":
        """Copie indépendante (paramètres dupliqués)."""
        return replace(self, net=self.net.copy())

    def with_params(self, params: np.ndarray) -> "FlowActor":
        """Même configuration, autres paramètres."""
        return replace(self, net=Mlp(self.net.layer_sizes, self.net.activation, params))

    def deterministic(self) -> "FlowActor":
        """Mode évaluation: pas d'exploration (K = 0, σ = 0)."""
        return replace(self, explore_steps=0, sigma_explore=0.0)

    def draw_latents(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Tire x ~ π_θ(·|s), sans exploration."""
        x1, _ = sample_latent(self, states, rng)
        return x1

    def act(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Latent utilisé pour le contrôle: échantillonnage puis exploration."""
        x1, _ = sample_latent(self, states, rng)
        return explore_steps(self, x1, states, rng)


def make_flow_actor(
    state_dim: int,
    latent_dim: int,
    hidden: Sequence[int],
    rng: np.random.Generator,
    activation: str = "tanh",
    **kwargs,
) -> FlowActor:
    """Construit un acteur à champ de vitesse initialisé aléatoirement."""
    sizes = (state_dim + latent_dim + 1, *hidden, latent_dim)
    return FlowActor(init_mlp(sizes, rng, activation), state_dim, latent_dim, **kwargs)


def velocity(actor: FlowActor, x: np.ndarray, tau, s: np.ndarray) -> np.ndarray:
    """Évalue v_θ(x, τ | s) ; τ scalaire ou de même forme de tête que x."""
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), x.shape[:-1])
    s = np.broadcast_to(s, x.shape[:-1] + (actor.state_dim,))
    inp = np.concatenate([s, x, tau[..., None]], axis=-1)
    return mlp_forward(actor.net, inp)


def draw_cfm_samples(
    rng: np.random.Generator, latent_dim: int, m_draws: int
) -> Tuple[CfmSample, ...]:
    """Tire `m_draws` paires (x0 ~ N(0, I), τ ~ U[0.02, 0.98])."""
    x0 = rng.standard_normal((m_draws, latent_dim))
    tau = rng.uniform(TAU_LOW, TAU_HIGH, size=m_draws)
    return tuple(CfmSample(x0[j], float(tau[j])) for j in range(m_draws))


def stack_draws(draws_list: Sequence[Sequence[CfmSample]]) -> Tuple[np.ndarray, np.ndarray]:
    """Empile des tirages (n listes de m tirages) en tableaux (n, m, D) et (n, m)."""
    if any(len(d) == 0 for d in draws_list):
        raise ValueError("Liste de tirages CFM vide")
    m = len(draws_list[0])
    if any(len(d) != m for d in draws_list):
        raise ValueError("Nombre de tirages CFM hétérogène dans le lot")
    x0 = np.stack([np.stack([c.x0 for c in d]) for d in draws_list])
    tau = np.array([[c.tau for c in d] for d in draws_list], dtype=np.float64)
    return x0, tau


def _cfm_terms(actor: FlowActor, s, x1, x0, tau):
    # entrées (n, m, d + D + 1), écarts (n, m, D)
    n, m, _ = x0.shape
    x_tau = (1.0 - tau[..., None]) * x0 + tau[..., None] * x1[:, None, :]
    s_b = np.broadcast_to(s[:, None, :], (n, m, actor.state_dim))
    inp = np.concatenate([s_b, x_tau, tau[..., None]], axis=-1)
    v = mlp_forward(actor.net, inp)
    diff = v - (x1[:, None, :] - x0)
    return inp, diff


def cfm_losses(
    actor: FlowActor, s: np.ndarray, x1: np.ndarray, x0: np.ndarray, tau: np.ndarray
) -> np.ndarray:
    """Pertes CFM par échantillon, pour un lot.

    Parameters
    ----------
    actor: FlowActor
        Acteur évalué.
    s: np.ndarray
        États (n, d).
    x1: np.ndarray
        Latents (n, D).
    x0: np.ndarray
        Bruits figés (n, m, D).
    tau: np.ndarray
        Temps de flot figés (n, m).

    Returns
    -------
    losses: np.ndarray
        (n,) moyenne sur les m tirages de ||v_θ(x_τ, τ | s) - (x1 - x0)||².
    """
    _, diff = _cfm_terms(actor, s, x1, x0, tau)
    losses = np.mean(np.sum(diff * diff, axis=-1), axis=-1)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError("Perte CFM non finie")
    return losses


def cfm_losses_and_grad(
    actor: FlowActor,
    s: np.ndarray,
    x1: np.ndarray,
    x0: np.ndarray,
    tau: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Pertes CFM du lot et gradient de Σ_i w_i ℓ_i par rapport à θ.

    `weights` vaut 1 pour chaque élément par défaut.
    """
    inp, diff = _cfm_terms(actor, s, x1, x0, tau)
    losses = np.mean(np.sum(diff * diff, axis=-1), axis=-1)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError("Perte CFM non finie")
    n, m, _ = x0.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    upstream = (2.0 / m) * diff * w[:, None, None]
    grads = mlp_backward(actor.net, inp, upstream)
    return losses, grads.params


def cfm_loss(
    actor: FlowActor, s: np.ndarray, x1: np.ndarray, draws: Sequence[CfmSample]
) -> float:
    """Perte CFM d'un échantillon (s, x1) sur ses tirages figés.

    Parameters
    ----------
    actor: FlowActor
        Acteur évalué.
    s: np.ndarray
        État (d,).
    x1: np.ndarray
        Latent (D,).
    draws: sequence of CfmSample
        Tirages figés, non vide.

    Returns
    -------
    loss: float
        Perte CFM (>= 0).
    """
    if len(draws) == 0:
        raise ValueError("Liste de tirages CFM vide")
    s = np.asarray(s, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if s.shape != (actor.state_dim,) or x1.shape != (actor.latent_dim,):
        raise ValueError(
            f"Dimensions incompatibles: s {s.shape}, x1 {x1.shape} "
            f"(attendu ({actor.state_dim},), ({actor.latent_dim},))"
        )
    x0, tau = stack_draws([draws])
    return float(cfm_losses(actor, s[None], x1[None], x0, tau)[0])


def sample_latent(
    actor: FlowActor, s: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Échantillonne un latent par intégration d'Euler de u = 0 à u = 1.

    Parameters
    ----------
    actor: FlowActor
        Acteur (non modifié).
    s: np.ndarray
        État (d,) ou lot d'états (n, d).
    rng: np.random.Generator
        Générateur pour le bruit initial x(0) ~ N(0, I_D).

    Returns
    -------
    x1: np.ndarray
        Latent x(1), de forme (D,) ou (n, D).
    x0: np.ndarray
        Bruit initial utilisé, même forme.
    """
    s = np.asarray(s, dtype=np.float64)
    single = s.ndim == 1
    s2 = s[None] if single else s
    if s2.shape[-1] != actor.state_dim:
        raise ValueError(f"État de dimension {s.shape}, attendu {actor.state_dim}")
    x0 = rng.standard_normal((s2.shape[0], actor.latent_dim))
    x = x0.copy()
    dt = 1.0 / actor.n_sample_steps
    for k in range(actor.n_sample_steps):
        x = x + dt * velocity(actor, x, k * dt, s2)
        if not np.all(np.isfinite(x)):
            raise SamplingError(k)
    if single:
        return x[0], x0[0]
    return x, x0


def explore_steps(
    actor: FlowActor, x: np.ndarray, s: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Perturbe un latent par K pas d'Euler courts le long du champ de vitesse.

    x^(k+1) = x^(k) + η v_θ(x^(k), τ_explore | s) + σ ξ_k, ξ_k ~ N(0, I_D).
    Aucun tirage n'est consommé lorsque σ = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    for _ in range(actor.explore_steps):
        x = x + actor.eta * velocity(actor, x, actor.explore_tau, s)
        if actor.sigma_explore > 0:
            x = x + actor.sigma_explore * rng.standard_normal(x.shape)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("Latent d'exploration non fini")
    return x


def actor_grad_from_ratio(actor: FlowActor, minibatch, ratio_grads: np.ndarray) -> np.ndarray:
    """Gradient de l'acteur: Σ_i (∂L/∂ℓ_i) · ∂ℓ_cfm,i/∂θ sur les tirages figés.

    Parameters
    ----------
    actor: FlowActor
        Acteur courant θ.
    minibatch: sequence
        Éléments portant `s`, `x` et `draws` (ex: Transition).
    ratio_grads: np.ndarray
        (n,) dérivées de la perte de l'acteur par rapport à chaque ℓ_cfm.

    Returns
    -------
    grad: np.ndarray
        Gradient par rapport au vecteur de paramètres de l'acteur.
    """
    ratio_grads = np.asarray(ratio_grads, dtype=np.float64)
    if len(minibatch) != ratio_grads.shape[0]:
        raise ValueError(
            f"{len(minibatch)} éléments pour {ratio_grads.shape[0]} dérivées"
        )
    for i, tr in enumerate(minibatch):
        if not getattr(tr, "draws", None):
            raise ValueError(f"Élément {i} du lot sans tirages CFM figés")
    s = np.stack([tr.s for tr in minibatch])
    x1 = np.stack([tr.x for tr in minibatch])
    x0, tau = stack_draws([tr.draws for tr in minibatch])
    _, grad = cfm_losses_and_grad(actor, s, x1, x0, tau, weights=ratio_grads)
    return grad
