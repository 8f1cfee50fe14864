"""
# Erreurs de l'entraînement.
"""

from pathlib import Path
from typing import Optional


class TrainingError(RuntimeError):
    """Échec d'une phase d'entraînement, avec son contexte.

    Attributes
    ----------
    algo: str
        Algorithme entraîné.
    seed: int
        Graine de l'exécution.
    phase: int
        Indice de la phase (0 pour le clonage comportemental).
    env_ticks: int
        Ticks d'environnement consommés au moment de l'échec.
    dump_path: Path, optional
        Archive des paramètres au moment de l'échec.
    """

    def __init__(
        self,
        msg: str,
        algo: str = "",
        seed: int = 0,
        phase: int = 0,
        env_ticks: int = 0,
        dump_path: Optional[Path] = None,
    ):
        self.algo = algo
        self.seed = seed
        self.phase = phase
        self.env_ticks = env_ticks
        self.dump_path = dump_path
        ctx = f"[{algo} graine={seed} phase={phase} ticks={env_ticks}]"
        if dump_path is not None:
            ctx += f" état sauvegardé dans {dump_path}"
        super().__init__(f"{msg} {ctx}")
