"""
# Tampon glissant de trajectoires.

Le tampon conserve les W collectes (rollouts) les plus récentes et évince les
plus anciennes. Chaque transition porte le latent exactement utilisé pour le
contrôle, la perte CFM initiale ℓ_init calculée sous θ_old au moment de la
collecte, et les tirages Monte-Carlo figés qui ont servi à la calculer.
"""

from collections import deque
from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.agent.flow_actor import CfmSample
from src.utils.file_utils import write_jsonl

# schéma des colonnes scalaires des enregistrements du tampon
DTYPE_BUFFER_RECORD = {
    "rollout_id": "int64",
    "step_index": "int64",
    "env_index": "int64",
    "r": "float64",
    "done": "bool",
    "truncated": "bool",
    "l_init": "float64",
}


class TrajectoryError(ValueError):
    """Trajectoire mal formée."""


@dataclass(frozen=True)
class Transition:
    """Une étape de politique (un latent, H ticks d'environnement).

    Attributes
    ----------
    s, x, a, s_next: np.ndarray
        État, latent après exploration, bloc d'actions décodé (H·d_a), état suivant.
    r: float
        Récompense cumulée sur les ticks du bloc.
    done: bool
        Épisode terminé sur un état terminal (succès).
    truncated: bool
        Épisode coupé par la limite de temps (non terminal).
    l_init: float
        Perte CFM sous θ_old à la collecte, sur `draws`.
    draws: tuple of CfmSample
        Tirages figés.
    rollout_id: int
        Identifiant croissant de la collecte.
    step_index: int
        Rang de la transition dans sa collecte.
    env_index: int
        Indice de l'environnement parallèle.
    """

    s: np.ndarray
    x: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    l_init: float
    draws: Tuple[CfmSample, ...]
    rollout_id: int
    step_index: int
    env_index: int = 0
    truncated: bool = False

    def __post_init__(self):
        for name in ("s", "x", "a", "s_next"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "draws", tuple(self.draws))

    @property
    def episode_end(self) -> bool:
        return self.done or self.truncated


class TrajectoryBuffer:
    """Tampon des W collectes les plus récentes."""

    def __init__(self, window: int, require_draws: bool = True):
        if window < 1:
            raise ValueError(f"La fenêtre doit être >= 1: {window}")
        self.window = window
        self.require_draws = require_draws
        self._rollouts = deque()

    def __len__(self) -> int:
        return sum(len(tr) for _, tr in self._rollouts)

    @property
    def n_rollouts(self) -> int:
        return len(self._rollouts)

    @property
    def rollout_ids(self) -> List[int]:
        return [rid for rid, _ in self._rollouts]

    def push_rollout(self, trajectory: Sequence[Transition]) -> None:
        """Ajoute une collecte et évince la plus ancienne au-delà de W."""
        trajectory = tuple(trajectory)
        if not trajectory:
            raise TrajectoryError("Trajectoire vide")
        rid = trajectory[0].rollout_id
        if any(tr.rollout_id != rid for tr in trajectory):
            raise TrajectoryError("Trajectoire mêlant plusieurs identifiants de collecte")
        if self._rollouts and rid <= self._rollouts[-1][0]:
            raise TrajectoryError(
                f"Identifiant de collecte non croissant: {rid} après {self._rollouts[-1][0]}"
            )
        steps = [tr.step_index for tr in trajectory]
        if steps != list(range(steps[0], steps[0] + len(steps))):
            raise TrajectoryError(f"Indices d'étape non contigus dans la collecte {rid}")
        for tr in trajectory:
            if self.require_draws and not tr.draws:
                raise TrajectoryError(
                    f"Transition {tr.step_index} de la collecte {rid} sans tirages CFM"
                )
        self._rollouts.append((rid, trajectory))
        while len(self._rollouts) > self.window:
            old_id, _ = self._rollouts.popleft()
            logging.debug(f"Collecte {old_id} évincée du tampon")

    def transitions(self) -> List[Transition]:
        """Toutes les transitions retenues, par collecte puis par étape."""
        return [tr for _, traj in self._rollouts for tr in traj]

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Tirage uniforme sans remise (avec remise si batch_size dépasse la population)."""
        population = self.transitions()
        if not population:
            raise ValueError("Tampon vide")
        if batch_size < 1:
            raise ValueError(f"Taille de lot invalide: {batch_size}")
        replace = batch_size > len(population)
        idx = rng.choice(len(population), size=batch_size, replace=replace)
        return [population[i] for i in idx]

    def iter_ordered(self) -> Iterator[Tuple[Transition, ...]]:
        """Transitions groupées par collecte (ordre des identifiants), dans l'ordre des étapes."""
        for _, traj in self._rollouts:
            yield traj

    def segments(self) -> Iterator[List[Transition]]:
        """Segments temporels pour GAE: par collecte et par environnement, coupés en fin d'épisode."""
        for traj in self.iter_ordered():
            for env_index in sorted({tr.env_index for tr in traj}):
                current = []
                for tr in traj:
                    if tr.env_index != env_index:
                        continue
                    current.append(tr)
                    if tr.episode_end:
                        yield current
                        current = []
                if current:
                    yield current

    def to_frame(self) -> pd.DataFrame:
        """Une ligne par transition (vecteurs sous forme de listes)."""
        rows = [
            {
                "rollout_id": tr.rollout_id,
                "step_index": tr.step_index,
                "env_index": tr.env_index,
                "r": tr.r,
                "done": tr.done,
                "truncated": tr.truncated,
                "l_init": tr.l_init,
                "s": tr.s.tolist(),
                "x": tr.x.tolist(),
                "a": tr.a.tolist(),
                "s_next": tr.s_next.tolist(),
            }
            for tr in self.transitions()
        ]
        df = pd.DataFrame(rows, columns=list(DTYPE_BUFFER_RECORD) + ["s", "x", "a", "s_next"])
        return df.astype(DTYPE_BUFFER_RECORD)

    def dump_records(self, path: Path) -> None:
        """Écrit le tampon en JSON lines (un enregistrement par transition)."""
        write_jsonl(self.to_frame(), path)
        logging.info(f"Tampon exporté: {len(self)} transitions dans {path}")
