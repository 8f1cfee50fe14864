"""
# Générateurs pseudo-aléatoires reproductibles.

Chaque consommateur d'aléa (initialisation des réseaux, collecte, mise à jour,
évaluation, démonstrations) reçoit son propre flux, dérivé de la graine de
l'exécution par `np.random.SeedSequence`.
Même graine et même séquence d'appels donnent des tirages identiques au bit près.
"""

from typing import Union

import numpy as np

# identifiants des flux nommés (l'ordre ne doit jamais changer)
STREAMS = {
    "init": 0,
    "demos": 1,
    "bc": 2,
    "rollout": 3,
    "update": 4,
    "eval": 5,
    "env": 6,
}


def make_rng(seed: int, stream: Union[str, int] = 0, *sub: int) -> np.random.Generator:
    """Crée un générateur PCG64 pour un flux donné.

    Parameters
    ----------
    seed: int
        Graine de l'exécution (entier positif sur 64 bits).
    stream: str or int, defaults to 0
        Nom du flux (clé de STREAMS) ou identifiant numérique.
    *sub: int
        Sous-identifiants optionnels (ex: indice d'environnement, d'épisode).

    Returns
    -------
    rng: np.random.Generator
        Générateur indépendant des autres flux.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"Graine hors de l'intervalle [0, 2^64): {seed}")
    stream_id = STREAMS[stream] if isinstance(stream, str) else int(stream)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id, *sub))
    return np.random.Generator(np.random.PCG64(seq))


def split_rng(rng: np.random.Generator, n: int) -> "list[np.random.Generator]":
    """Dérive `n` générateurs indépendants d'un générateur existant.

    Consomme un tirage du générateur parent.
    """
    seeds = rng.integers(0, 2**63 - 1, size=n, dtype=np.int64)
    return [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
