"""
# Lecture et écriture du fichier de configuration (YAML plat).
"""

import logging
from pathlib import Path

import yaml

from src.trainer.config import ConfigError, TrainerConfig, config_from_dict
from src.utils.file_utils import get_text_digest


def dump_config(cfg: TrainerConfig) -> str:
    """Texte YAML canonique (clés triées)."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=None, allow_unicode=True)


def config_hash(cfg: TrainerConfig) -> str:
    """Empreinte blake2b (10 octets) du texte canonique."""
    return get_text_digest(dump_config(cfg))


def load_config(path: Path) -> TrainerConfig:
    """Charge et valide une configuration.

    Parameters
    ----------
    path: Path
        Fichier YAML `clé: valeur` ; un fichier vide donne les valeurs par défaut.

    Returns
    -------
    cfg: TrainerConfig
        Configuration validée.

    Raises
    ------
    ConfigError
        Clé inconnue ou valeur hors domaine (tous les champs fautifs sont listés).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Le fichier en entrée {path} n'existe pas.")
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError([("<fichier>", str(path), f"YAML valide ({exc})")]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([("<fichier>", str(path), "table clé: valeur")])
    cfg = config_from_dict(data)
    logging.info(f"Configuration chargée depuis {path} (empreinte {config_hash(cfg)})")
    return cfg


def save_config(cfg: TrainerConfig, path: Path) -> None:
    with open(path, mode="w", encoding="utf-8") as f:
        f.write(dump_config(cfg))
