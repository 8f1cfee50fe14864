"""
# Ensemble de critiques Q(s, x) et avantages GAE.

M critiques en ligne et M cibles, mises à jour par moyenne de Polyak.
La cible TD et la valeur de référence V(s) prennent le minimum des cibles,
ce qui limite la surestimation.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.numkit.mlp import Mlp, NonFiniteError, init_mlp, mlp_backward, mlp_forward
from src.numkit.rng import split_rng


@dataclass
class ValueEnsemble:
    """Critiques Q_φᵢ(s, x) et leurs cibles Q_φ̄ᵢ.

    Attributes
    ----------
    critics: list of Mlp
        Critiques en ligne, entrée d + D, sortie scalaire.
    targets: list of Mlp
        Cibles, de mêmes formes.
    gamma: float
        Facteur d'actualisation, dans (0, 1).
    lam: float
        λ de GAE, dans [0, 1].
    tau_polyak: float
        Coefficient de Polyak, dans (0, 1].
    """

    critics: List[Mlp]
    targets: List[Mlp]
    gamma: float = 0.99
    lam: float = 0.95
    tau_polyak: float = 0.005
    _in_dim: int = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.critics) < 1:
            raise ValueError("L'ensemble doit compter au moins un critique")
        if len(self.targets) != len(self.critics):
            raise ValueError(
                f"{len(self.critics)} critiques pour {len(self.targets)} cibles"
            )
        sizes = self.critics[0].layer_sizes
        for net in self.critics + self.targets:
            if net.layer_sizes != sizes or net.activation != self.critics[0].activation:
                raise ValueError("Critiques et cibles de formes différentes")
        if sizes[-1] != 1:
            raise ValueError(f"Sortie d'un critique non scalaire: {sizes[-1]}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma hors de (0, 1): {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda hors de [0, 1]: {self.lam}")
        if not 0.0 < self.tau_polyak <= 1.0:
            raise ValueError(f"tau_polyak hors de (0, 1]: {self.tau_polyak}")
        self._in_dim = sizes[0]

    @property
    def n_members(self) -> int:
        return len(self.critics)

    def copy(self) -> "ValueEnsemble":
        return ValueEnsemble(
            [c.copy() for c in self.critics],
            [t.copy() for t in self.targets],
            self.gamma,
            self.lam,
            self.tau_polyak,
        )


def make_value_ensemble(
    state_dim: int,
    latent_dim: int,
    hidden: Sequence[int],
    n_members: int,
    rng: np.random.Generator,
    activation: str = "tanh",
    **kwargs,
) -> ValueEnsemble:
    """Initialise M critiques (graines distinctes) ; chaque cible part de son critique."""
    sizes = (state_dim + latent_dim, *hidden, 1)
    critics = [init_mlp(sizes, r, activation) for r in split_rng(rng, n_members)]
    return ValueEnsemble(critics, [c.copy() for c in critics], **kwargs)


def q_values(nets: Sequence[Mlp], s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Valeurs (M, n) des réseaux `nets` sur les paires (s, x) du lot."""
    inp = np.concatenate([np.atleast_2d(s), np.atleast_2d(x)], axis=-1)
    q = np.stack([mlp_forward(net, inp)[:, 0] for net in nets])
    if not np.all(np.isfinite(q)):
        raise NonFiniteError("Sortie de critique non finie")
    return q


def td_targets(
    ens: ValueEnsemble,
    r: np.ndarray,
    s_next: np.ndarray,
    done: np.ndarray,
    actor,
    rng: np.random.Generator,
) -> np.ndarray:
    """Cibles TD d'un lot: y = r + γ (1 - done) minᵢ Q_φ̄ᵢ(s', x'), x' ~ π_θ(·|s').

    Les latents x' sont tirés sans pas d'exploration.
    """
    r = np.asarray(r, dtype=np.float64)
    done = np.asarray(done, dtype=bool)
    x_next = actor.draw_latents(np.atleast_2d(s_next), rng)
    q_min = np.min(q_values(ens.targets, s_next, x_next), axis=0)
    return np.where(done, r, r + ens.gamma * q_min)


def td_target(ens: ValueEnsemble, r: float, s_next, done: bool, actor, rng) -> float:
    """Cible TD d'une transition."""
    return float(td_targets(ens, np.array([r]), np.atleast_2d(s_next), np.array([done]), actor, rng)[0])


def critic_loss(
    ens: ValueEnsemble, s: np.ndarray, x: np.ndarray, y: np.ndarray
) -> Tuple[float, List[np.ndarray]]:
    """Erreur TD quadratique moyenne sur le lot et sur l'ensemble.

    Parameters
    ----------
    ens: ValueEnsemble
        Ensemble évalué (non modifié).
    s: np.ndarray
        États (n, d).
    x: np.ndarray
        Latents (n, D).
    y: np.ndarray
        Cibles (n,), constantes.

    Returns
    -------
    loss: float
        mean_i mean_batch (Q_φᵢ(s, x) - y)².
    grads: list of np.ndarray
        Gradient par rapport aux paramètres de chaque critique.
    """
    s = np.atleast_2d(s)
    x = np.atleast_2d(x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    inp = np.concatenate([s, x], axis=-1)
    n, m = inp.shape[0], ens.n_members
    loss = 0.0
    grads = []
    for net in ens.critics:
        err = mlp_forward(net, inp)[:, 0] - y
        loss += float(np.mean(err * err)) / m
        upstream = (2.0 / (n * m)) * err[:, None]
        grads.append(mlp_backward(net, inp, upstream).params)
    if not np.isfinite(loss):
        raise NonFiniteError("Perte des critiques non finie")
    return loss, grads


def polyak_update(ens: ValueEnsemble, tau_polyak: Optional[float] = None) -> None:
    """φ̄ᵢ ← (1 - τ) φ̄ᵢ + τ φᵢ pour chaque membre (en place)."""
    tau = ens.tau_polyak if tau_polyak is None else tau_polyak
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau_polyak hors de (0, 1]: {tau}")
    for critic, target in zip(ens.critics, ens.targets):
        if tau == 1.0:
            target.params = critic.params.copy()
        else:
            # forme incrémentale: cibles inchangées au bit près si φ̄ = φ
            target.params = target.params + tau * (critic.params - target.params)


def value_baseline(
    ens: ValueEnsemble,
    s: np.ndarray,
    actor=None,
    rng: Optional[np.random.Generator] = None,
    x: Optional[np.ndarray] = None,
) -> np.ndarray:
    """V(s) = minᵢ Q_φ̄ᵢ(s, x'), avec le latent stocké x s'il est fourni, sinon x' ~ π_θ(·|s)."""
    s = np.atleast_2d(s)
    if x is None:
        if actor is None or rng is None:
            raise ValueError("Sans latent stocké, l'acteur et un générateur sont requis")
        x = actor.draw_latents(s, rng)
    return np.min(q_values(ens.targets, s, x), axis=0)


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Avantages GAE.

    Parameters
    ----------
    rewards: np.ndarray
        r_0..r_{T-1}.
    values: np.ndarray
        V_0..V_T (la dernière valeur sert d'amorçage).
    dones: np.ndarray
        Indicateurs de fin d'épisode (terminaux) d_0..d_{T-1}.
    gamma, lam: float
        Actualisation et λ.

    Returns
    -------
    adv: np.ndarray
        Â_0..Â_{T-1}, avec δ_t = r_t + γ V_{t+1} (1 - d_t) - V_t et
        Â_t = δ_t + γλ (1 - d_t) Â_{t+1}.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    n = rewards.shape[0]
    if values.shape[0] != n + 1 or dones.shape[0] != n:
        raise ValueError(
            f"Longueurs incompatibles: {n} récompenses, {values.shape[0]} valeurs, "
            f"{dones.shape[0]} indicateurs (attendu T, T + 1, T)"
        )
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        mask = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * mask - values[t]
        running = delta + gamma * lam * mask * running
        adv[t] = running
    return adv
