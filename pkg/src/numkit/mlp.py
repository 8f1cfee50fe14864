"""
# Perceptrons multicouches à rétropropagation analytique.

Tous les paramètres d'un réseau sont rangés dans un unique vecteur plat
(float64), dans l'ordre: pour chaque couche, la matrice des poids
(sortie x entrée, ligne par ligne) puis le vecteur des biais.
La fonction d'activation s'applique aux couches cachées uniquement,
la dernière couche est toujours linéaire.

Les entrées peuvent avoir des dimensions de tête quelconques, ex: (n, m, d_in) ;
le produit matriciel est alors évalué tranche par tranche, ce qui rend le résultat
de chaque tranche indépendant du nombre de tranches.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

# activations disponibles pour les couches cachées
ACTIVATIONS = ("tanh", "relu", "identity")


class NonFiniteError(ArithmeticError):
    """Valeur non finie (NaN ou infinie) rencontrée dans un calcul."""


@dataclass
class Mlp:
    """Perceptron multicouche.

    Attributes
    ----------
    layer_sizes: tuple of int
        Dimensions des couches, de l'entrée à la sortie.
    activation: str
        Activation des couches cachées: "tanh", "relu" ou "identity".
    params: np.ndarray
        Vecteur plat de tous les paramètres (float64).
    """

    layer_sizes: Tuple[int, ...]
    activation: str
    params: np.ndarray

    def __post_init__(self):
        self.layer_sizes = tuple(int(x) for x in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"Dimensions de couches invalides: {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"Activation inconnue: {self.activation} (attendu: {ACTIVATIONS})"
            )
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (n_params(self.layer_sizes),):
            raise ValueError(
                f"{self.params.shape[0]} paramètres fournis, "
                f"{n_params(self.layer_sizes)} attendus pour {self.layer_sizes}"
            )

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, self.activation, self.params.copy())


class MlpGrads(NamedTuple):
    """Gradients renvoyés par `mlp_backward`."""

    params: np.ndarray  # même forme que Mlp.params
    input: np.ndarray  # même forme que l'entrée


def n_params(layer_sizes: Sequence[int]) -> int:
    """Nombre de paramètres: somme des (n_i + 1) * n_{i+1}."""
    return sum(
        (layer_sizes[i] + 1) * layer_sizes[i + 1] for i in range(len(layer_sizes) - 1)
    )


def init_mlp(
    layer_sizes: Sequence[int], rng: np.random.Generator, activation: str = "tanh"
) -> Mlp:
    """Initialise un réseau (Glorot uniforme, biais nuls).

    Parameters
    ----------
    layer_sizes: sequence of int
        Dimensions des couches.
    rng: np.random.Generator
        Générateur pour les poids.
    activation: str, defaults to "tanh"
        Activation des couches cachées.

    Returns
    -------
    net: Mlp
        Réseau initialisé, poids uniformes dans ±sqrt(6 / (fan_in + fan_out)).
    """
    chunks = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return Mlp(tuple(layer_sizes), activation, np.concatenate(chunks))


def unpack_layers(net: Mlp) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Vues (W, b) sur le vecteur plat, une paire par couche."""
    return _unpack(net.layer_sizes, net.params)


def _unpack(layer_sizes: Sequence[int], flat: np.ndarray):
    layers = []
    offset = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = flat[offset : offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = flat[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def _activate(kind: str, a: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(a)
    if kind == "relu":
        return np.maximum(a, 0.0)
    return a


def _activate_grad(kind: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    # dérivée exprimée à partir de la pré-activation a et de la sortie h
    if kind == "tanh":
        return 1.0 - h * h
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    return np.ones_like(a)


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != net.in_dim:
        raise ValueError(
            f"Entrée de dimension {x.shape} incompatible avec la couche d'entrée ({net.in_dim})"
        )
    return x


def _forward_cache(net: Mlp, x: np.ndarray):
    layers = unpack_layers(net)
    hs = [x]
    pres = []
    h = x
    for i, (w, b) in enumerate(layers):
        a = h @ w.T + b
        h = a if i == len(layers) - 1 else _activate(net.activation, a)
        pres.append(a)
        hs.append(h)
    return hs, pres


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Passe avant.

    Parameters
    ----------
    net: Mlp
        Réseau (non modifié).
    x: np.ndarray
        Entrée de forme (..., layer_sizes[0]).

    Returns
    -------
    y: np.ndarray
        Sortie de forme (..., layer_sizes[-1]).
    """
    x = _check_input(net, x)
    hs, _ = _forward_cache(net, x)
    return hs[-1]


def mlp_backward(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> MlpGrads:
    """Gradients analytiques de <upstream, mlp_forward(net, x)>.

    Les gradients des paramètres sont sommés sur toutes les dimensions de tête.

    Parameters
    ----------
    net: Mlp
        Réseau (non modifié).
    x: np.ndarray
        Entrée de forme (..., layer_sizes[0]).
    upstream: np.ndarray
        Gradient amont, de même forme que la sortie.

    Returns
    -------
    grads: MlpGrads
        Gradient par rapport au vecteur de paramètres et par rapport à l'entrée.
    """
    x = _check_input(net, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape[:-1] + (net.out_dim,):
        raise ValueError(
            f"Gradient amont de forme {upstream.shape}, attendu {x.shape[:-1] + (net.out_dim,)}"
        )
    hs, pres = _forward_cache(net, x)
    layers = unpack_layers(net)
    grad_flat = np.zeros_like(net.params)
    grad_layers = _unpack(net.layer_sizes, grad_flat)
    g = upstream
    last = len(layers) - 1
    for i in range(last, -1, -1):
        if i != last:
            g = g * _activate_grad(net.activation, pres[i], hs[i + 1])
        h_prev = hs[i]
        g2 = g.reshape(-1, g.shape[-1])
        gw, gb = grad_layers[i]
        gw[...] = g2.T @ h_prev.reshape(-1, h_prev.shape[-1])
        gb[...] = g2.sum(axis=0)
        g = g @ layers[i][0]
    return MlpGrads(params=grad_flat, input=g)


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> Tuple[np.ndarray, float]:
    """Ramène la norme globale du gradient à `max_norm` au plus.

    Returns
    -------
    grad_clipped: np.ndarray
        Gradient éventuellement réduit.
    norm: float
        Norme avant réduction.
    """
    norm = float(np.sqrt(np.sum(grad * grad)))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm
