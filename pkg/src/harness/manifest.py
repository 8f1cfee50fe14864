"""
# Manifeste d'une exécution.
"""

from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List

import yaml

from src import __version__

# fichiers produits dans le dossier d'une exécution
RUN_LAYOUT = {
    "config": "config.yaml",
    "manifest": "manifest.yaml",
    "metrics": "metrics.csv",
    "metrics_updates": "metrics_updates.csv",
    "checkpoint": "checkpoint.ckpt",
    "prior": "prior.ckpt",
    "demos": "demos.jsonl",
    "latents": "latents.jsonl",
    "latent_stats": "latent_stats.csv",
    "buffer": "buffer.jsonl",
    "curves": "curves.svg",
    "ablation": "ablation.csv",
    "logs": "logs/",
}


@dataclass
class RunManifest:
    """Provenance d'une exécution.

    Attributes
    ----------
    command: str
        Sous-commande exécutée.
    config_hash: str
        Empreinte de la configuration.
    seeds: list of int
        Graines utilisées.
    version: str
        Version du code.
    started_at: str
        Horodatage ISO du lancement.
    layout: dict
        Fichiers de l'exécution, relatifs au dossier.
    """

    command: str
    config_hash: str
    seeds: List[int]
    version: str = __version__
    started_at: str = field(default_factory=lambda: datetime.now().isoformat())
    layout: Dict[str, str] = field(default_factory=lambda: dict(RUN_LAYOUT))


def write_manifest(manifest: RunManifest, fp_out: Path) -> None:
    with open(fp_out, mode="w", encoding="utf-8") as f:
        yaml.safe_dump(asdict(manifest), f, sort_keys=True, allow_unicode=True)


def read_manifest(fp_in: Path) -> RunManifest:
    with open(fp_in, encoding="utf-8") as f:
        return RunManifest(**yaml.safe_load(f))
