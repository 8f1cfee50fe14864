"""
# Points de sauvegarde binaires versionnés.

Format (petit-boutiste):

* 8 octets: magique `b"FPOCKPT\\0"` ;
* uint32: version du format (1) ;
* uint32: longueur L de l'en-tête ;
* L octets: en-tête JSON UTF-8, clés triées: `config`, `config_hash`, `kind`
  ("prior" ou "trained"), `actor_type` ("flow" ou "gaussian"), `blocks`
  (liste de `[nom, nombre de valeurs, dimensions des couches, activation]`) ;
* les blocs float64 dans l'ordre de l'en-tête: acteur (et `actor_log_std`
  pour l'acteur gaussien), décodeur s'il y en a un, critic_0..M-1,
  target_0..M-1.
"""

from dataclasses import dataclass
import json
from pathlib import Path
import struct
from typing import Dict, List, Optional

import numpy as np

from src.agent.flow_actor import FlowActor
from src.agent.gaussian_actor import GaussianActor
from src.agent.value_ensemble import ValueEnsemble
from src.envlab.base_decoder import BaseDecoder
from src.numkit.mlp import Mlp
from src.trainer.config import TrainerConfig, config_from_dict

MAGIC = b"FPOCKPT\0"
FORMAT_VERSION = 1
KINDS = ("prior", "trained")


class CheckpointError(ValueError):
    """Fichier de sauvegarde illisible."""


class CheckpointVersionError(CheckpointError):
    """Version de format incompatible."""


@dataclass
class Checkpoint:
    """Contenu d'un point de sauvegarde.

    Attributes
    ----------
    header: dict
        En-tête JSON.
    blocks: dict of str to np.ndarray
        Blocs de paramètres, par nom.
    """

    header: Dict
    blocks: Dict[str, np.ndarray]

    @property
    def config(self) -> TrainerConfig:
        return config_from_dict(self.header["config"])

    def block_meta(self, name: str) -> List:
        for meta in self.header["blocks"]:
            if meta[0] == name:
                return meta
        raise CheckpointError(f"Bloc absent du point de sauvegarde: {name}")

    def net(self, name: str) -> Mlp:
        _, _, sizes, activation = self.block_meta(name)
        return Mlp(tuple(sizes), activation, self.blocks[name].copy())


def _block(name: str, values: np.ndarray, net: Optional[Mlp] = None):
    sizes = list(net.layer_sizes) if net is not None else []
    activation = net.activation if net is not None else ""
    return [name, int(values.size), sizes, activation], values


def build_checkpoint(
    cfg: TrainerConfig,
    config_hash: str,
    kind: str,
    actor,
    decoder: BaseDecoder,
    critics: Optional[ValueEnsemble] = None,
) -> Checkpoint:
    """Assemble l'en-tête et les blocs d'un point de sauvegarde."""
    if kind not in KINDS:
        raise ValueError(f"Type de point de sauvegarde inconnu: {kind} (attendu: {KINDS})")
    entries = [_block("actor", actor.net.params, actor.net)]
    if isinstance(actor, GaussianActor):
        entries.append(_block("actor_log_std", actor.log_std))
    if decoder.net is not None:
        entries.append(_block("decoder", decoder.net.params, decoder.net))
    if critics is not None:
        entries += [_block(f"critic_{i}", c.params, c) for i, c in enumerate(critics.critics)]
        entries += [_block(f"target_{i}", t.params, t) for i, t in enumerate(critics.targets)]
    header = {
        "config": cfg.to_dict(),
        "config_hash": config_hash,
        "kind": kind,
        "actor_type": "gaussian" if isinstance(actor, GaussianActor) else "flow",
        "decoder_mode": decoder.mode,
        "blocks": [meta for meta, _ in entries],
    }
    return Checkpoint(header, {meta[0]: np.array(values, dtype=np.float64) for meta, values in entries})


def save_checkpoint(ckpt: Checkpoint, path: Path) -> None:
    header = json.dumps(ckpt.header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, mode="wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        f.write(header)
        for name, *_ in ckpt.header["blocks"]:
            f.write(np.ascontiguousarray(ckpt.blocks[name], dtype="<f8").tobytes())


def load_checkpoint(path: Path) -> Checkpoint:
    """Relit un point de sauvegarde.

    Raises
    ------
    CheckpointVersionError
        Version de format différente de FORMAT_VERSION.
    CheckpointError
        Magique invalide, fichier tronqué ou en-tête illisible.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Le fichier en entrée {path} n'existe pas.")
    data = path.read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: nombre magique invalide")
    offset = len(MAGIC)
    if len(data) < offset + 8:
        raise CheckpointError(f"{path}: fichier tronqué")
    version, header_len = struct.unpack("<II", data[offset : offset + 8])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: version de format {version}, version prise en charge {FORMAT_VERSION}"
        )
    offset += 8
    try:
        header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: en-tête illisible") from exc
    offset += header_len
    blocks = {}
    for name, n_values, *_ in header["blocks"]:
        end = offset + 8 * n_values
        if end > len(data):
            raise CheckpointError(f"{path}: fichier tronqué dans le bloc {name}")
        blocks[name] = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} octets inattendus en fin de fichier")
    return Checkpoint(header, blocks)


def restore_actor(ckpt: Checkpoint, cfg: TrainerConfig):
    """Acteur du point de sauvegarde, paramètres d'échantillonnage et d'exploration pris dans `cfg`."""
    net = ckpt.net("actor")
    if ckpt.header["actor_type"] == "gaussian":
        return GaussianActor(net, ckpt.blocks["actor_log_std"].copy())
    state_dim = net.in_dim - net.out_dim - 1
    return FlowActor(
        net,
        state_dim,
        net.out_dim,
        n_sample_steps=cfg.n_sample_steps,
        explore_steps=cfg.effective_explore_steps,
        eta=cfg.eta,
        sigma_explore=cfg.sigma_explore,
        explore_tau=cfg.explore_tau,
    )


def restore_decoder(ckpt: Checkpoint, state_dim: int, chunk_len: int, action_dim: int) -> BaseDecoder:
    """Décodeur gelé du point de sauvegarde."""
    mode = ckpt.header["decoder_mode"]
    net = ckpt.net("decoder") if mode == "net" else None
    dec = BaseDecoder(mode, state_dim, chunk_len, action_dim, net)
    dec.freeze()
    return dec


def restore_critics(ckpt: Checkpoint, cfg: TrainerConfig) -> Optional[ValueEnsemble]:
    names = [meta[0] for meta in ckpt.header["blocks"]]
    n = sum(1 for name in names if name.startswith("critic_"))
    if n == 0:
        return None
    return ValueEnsemble(
        [ckpt.net(f"critic_{i}") for i in range(n)],
        [ckpt.net(f"target_{i}") for i in range(n)],
        gamma=cfg.gamma,
        lam=cfg.lam,
        tau_polyak=cfg.tau_polyak,
    )
