"""
# Configuration du journal des scripts.

"""

from datetime import datetime
import logging
from pathlib import Path
from typing import Optional

# dossier des journaux par défaut, à la racine du dépôt
DIR_LOG = Path(__file__).resolve().parents[2] / "logs"


def setup_logging(command: str, out_dir: Optional[Path] = None) -> Path:
    """Journal DEBUG dans `<out_dir>/logs/<command>_<horodatage>.log`.

    Sans dossier de sortie, le dossier `logs/` du dépôt est utilisé.

    Returns
    -------
    fp_log: Path
        Chemin du fichier journal.
    """
    dir_log = Path(out_dir) / "logs" if out_dir is not None else DIR_LOG
    dir_log.mkdir(parents=True, exist_ok=True)
    fp_log = dir_log / f"{command}_{datetime.now().isoformat()}.log"
    logging.basicConfig(
        filename=fp_log,
        encoding="utf-8",
        level=logging.DEBUG,
    )
    logging.captureWarnings(True)
    return fp_log
