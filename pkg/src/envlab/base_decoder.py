"""
# Décodeur de base gelé π₀(a | s, x).

Le décodeur transforme un latent x (dimension D = H·d_a) en un bloc de H
actions élémentaires, écrêtées à ±1.

* mode "identity": le latent est directement remis en forme (H, d_a) ;
* mode "net": un perceptron (s, x) → H·d_a, entraîné conjointement à l'acteur
  pendant le clonage comportemental, puis gelé. L'empreinte de ses paramètres
  est relevée au gel et vérifiée ensuite.
"""

from dataclasses import dataclass
import logging
from typing import Optional, Sequence

import numpy as np

from src.numkit.mlp import Mlp, init_mlp, mlp_forward
from src.utils.file_utils import get_array_digest

DECODER_MODES = ("identity", "net")


@dataclass
class BaseDecoder:
    """Décodeur de blocs d'actions.

    Attributes
    ----------
    mode: str
        "identity" ou "net".
    state_dim: int
        Dimension d de l'état.
    chunk_len: int
        Longueur H du bloc.
    action_dim: int
        Dimension d_a d'une action élémentaire.
    net: Mlp, optional
        Réseau (mode "net"), entrée d + H·d_a, sortie H·d_a.
    frozen_digest: str, optional
        Empreinte des paramètres au gel.
    """

    mode: str
    state_dim: int
    chunk_len: int
    action_dim: int
    net: Optional[Mlp] = None
    frozen_digest: Optional[str] = None

    def __post_init__(self):
        if self.mode not in DECODER_MODES:
            raise ValueError(f"Mode de décodeur inconnu: {self.mode} (attendu: {DECODER_MODES})")
        if self.mode == "net":
            if self.net is None:
                raise ValueError("Le mode 'net' requiert un réseau")
            expected = (self.state_dim + self.latent_dim, self.latent_dim)
            if (self.net.in_dim, self.net.out_dim) != expected:
                raise ValueError(
                    f"Réseau du décodeur {self.net.in_dim} → {self.net.out_dim}, attendu "
                    f"{expected[0]} → {expected[1]}"
                )

    @property
    def latent_dim(self) -> int:
        return self.chunk_len * self.action_dim

    @property
    def frozen(self) -> bool:
        return self.frozen_digest is not None

    def digest(self) -> str:
        if self.net is None:
            return ""
        return get_array_digest(self.net.params)

    def freeze(self) -> None:
        self.frozen_digest = self.digest()
        logging.info(f"Décodeur gelé (mode {self.mode}, empreinte {self.frozen_digest!r})")

    def verify(self) -> bool:
        """True si les paramètres n'ont pas changé depuis le gel."""
        ok = self.frozen and self.digest() == self.frozen_digest
        logging.debug(f"Vérification de l'empreinte du décodeur: {'ok' if ok else 'ÉCHEC'}")
        return ok


def make_decoder(
    mode: str,
    state_dim: int,
    chunk_len: int,
    action_dim: int,
    hidden: Sequence[int] = (64, 64),
    rng: Optional[np.random.Generator] = None,
    activation: str = "tanh",
) -> BaseDecoder:
    """Crée un décodeur ; le mode "net" part de poids aléatoires (rng requis)."""
    net = None
    if mode == "net":
        if rng is None:
            raise ValueError("Un générateur est requis pour initialiser le décodeur")
        d_latent = chunk_len * action_dim
        net = init_mlp((state_dim + d_latent, *hidden, d_latent), rng, activation)
    return BaseDecoder(mode, state_dim, chunk_len, action_dim, net)


def decode_raw(dec: BaseDecoder, s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sortie du décodeur avant écrêtage et remise en forme, (..., H·d_a)."""
    s = np.asarray(s, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != dec.latent_dim or s.shape[-1] != dec.state_dim:
        raise ValueError(
            f"Dimensions incompatibles: s {s.shape}, x {x.shape} "
            f"(attendu d={dec.state_dim}, D={dec.latent_dim})"
        )
    if dec.mode == "identity":
        return x
    return mlp_forward(dec.net, np.concatenate([s, x], axis=-1))


def base_decode(dec: BaseDecoder, s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Bloc de H actions (H, d_a) écrêtées à ±1 ; (n, H, d_a) pour un lot."""
    out = np.clip(decode_raw(dec, s, x), -1.0, 1.0)
    return out.reshape(out.shape[:-1] + (dec.chunk_len, dec.action_dim))
