"""
# Démonstrateurs scriptés et jeux de démonstrations.

Le démonstrateur expert est un correcteur proportionnel-dérivé vers le but
(PointReach: la cible ; PushBlock: un point d'appui derrière le bloc, puis la
poussée vers la zone). Le démonstrateur sous-optimal applique le même
correcteur à une erreur tournée d'un angle fixe (biais d'approche) et ajoute
un bruit gaussien aux actions.

Chaque démonstration est une suite de paires (s, bloc de H actions) ; le bloc
aplati est le latent cible du clonage comportemental.
"""

import argparse
from datetime import datetime
import logging
from pathlib import Path
from typing import List, NamedTuple, Tuple

import numpy as np
import pandas as pd

from src.envlab.envs import CONTACT_RADIUS, Env, make_env
from src.numkit.rng import make_rng
from src.utils.file_utils import read_jsonl, write_jsonl

QUALITIES = ("expert", "suboptimal")

# gains du correcteur (amortissement proche du critique)
KP = 3.0
KD = 3.5

# défauts du démonstrateur sous-optimal, à recalibrer avec `calibrate_suboptimal`
SUBOPTIMAL_BIAS_DEG = 58.0
SUBOPTIMAL_NOISE = 0.3

DTYPE_DEMO = {
    "episode": "int64",
    "step": "int64",
    "success": "bool",
}


class DemoEpisode(NamedTuple):
    states: np.ndarray  # (n, d)
    chunks: np.ndarray  # (n, H·d_a)
    success: bool
    n_ticks: int

    @property
    def empty(self) -> bool:
        return self.states.shape[0] == 0


def _rotate(v: np.ndarray, angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _pd(pos, vel, target, angle_rad):
    err = _rotate(target - pos, angle_rad) if angle_rad else target - pos
    return KP * err - KD * vel


def _pushblock_target(state: np.ndarray) -> np.ndarray:
    pos, block, zone = state[0:2], state[4:6], state[6:8]
    to_zone = zone - block
    dist = np.linalg.norm(to_zone)
    u = to_zone / dist if dist > 0 else np.array([1.0, 0.0])
    behind = block - 1.5 * CONTACT_RADIUS * u
    rel = pos - block
    along = float(rel @ u)
    lateral = float(np.linalg.norm(rel - along * u))
    if along < 0 and lateral < 0.5 * CONTACT_RADIUS:
        # aligné derrière le bloc: on pousse à travers
        return block + 2.0 * CONTACT_RADIUS * u
    return behind


def scripted_action(
    env: Env,
    state: np.ndarray,
    quality: str,
    rng: np.random.Generator,
    bias_deg: float = SUBOPTIMAL_BIAS_DEG,
    noise: float = SUBOPTIMAL_NOISE,
) -> np.ndarray:
    """Action élémentaire du démonstrateur pour l'état courant, écrêtée à ±1."""
    if quality not in QUALITIES:
        raise ValueError(f"Qualité de démonstrateur inconnue: {quality} (attendu: {QUALITIES})")
    pos, vel = state[0:2], state[2:4]
    target = state[4:6] if env.name == "pointreach" else _pushblock_target(state)
    angle = np.deg2rad(bias_deg) if quality == "suboptimal" else 0.0
    a = _pd(pos, vel, target, angle)
    if quality == "suboptimal" and noise > 0:
        a = a + noise * rng.standard_normal(2)
    return np.clip(a, -1.0, 1.0)


def scripted_demo(
    env: Env,
    quality: str,
    rng: np.random.Generator,
    bias_deg: float = SUBOPTIMAL_BIAS_DEG,
    noise: float = SUBOPTIMAL_NOISE,
) -> DemoEpisode:
    """Déroule un épisode du démonstrateur.

    Parameters
    ----------
    env: Env
        Environnement (réinitialisé par la fonction).
    quality: str
        "expert" ou "suboptimal".
    rng: np.random.Generator
        Générateur de l'état initial et du bruit d'action.
    bias_deg: float
        Biais d'approche du démonstrateur sous-optimal, en degrés.
    noise: float
        Écart-type du bruit d'action du démonstrateur sous-optimal.

    Returns
    -------
    episode: DemoEpisode
        Paires (état en début de bloc, bloc d'actions) ; un bloc interrompu par
        la fin de l'épisode est complété par des actions nulles. Épisode vide
        (signalé par un avertissement) si l'horizon est nul.
    """
    state = env.reset(rng)
    states, chunks = [], []
    success = False
    n_ticks = 0
    while not env.finished:
        chunk = np.zeros((env.chunk_len, env.action_dim))
        states.append(state)
        for h in range(env.chunk_len):
            a = scripted_action(env, env.state, quality, rng, bias_deg, noise)
            chunk[h] = a
            res = env.step(a)
            n_ticks += 1
            if res.done or res.truncated:
                success = res.success
                break
        chunks.append(chunk.reshape(-1))
        state = env.state
    if not states:
        logging.warning("Démonstration vide (horizon nul)")
        return DemoEpisode(np.zeros((0, env.state_dim)), np.zeros((0, env.latent_dim)), False, 0)
    return DemoEpisode(np.array(states), np.array(chunks), success, n_ticks)


def generate_demos(
    env: Env,
    quality: str,
    n_episodes: int,
    rng: np.random.Generator,
    bias_deg: float = SUBOPTIMAL_BIAS_DEG,
    noise: float = SUBOPTIMAL_NOISE,
) -> List[DemoEpisode]:
    return [scripted_demo(env, quality, rng, bias_deg, noise) for _ in range(n_episodes)]


def demo_success_rate(episodes: List[DemoEpisode]) -> float:
    if not episodes:
        return 0.0
    return float(np.mean([ep.success for ep in episodes]))


def calibrate_suboptimal(
    env: Env,
    seed: int,
    band: Tuple[float, float] = (0.3, 0.5),
    n_episodes: int = 200,
    noise: float = SUBOPTIMAL_NOISE,
    lo: float = 0.0,
    hi: float = 90.0,
    max_iter: int = 12,
) -> Tuple[float, float]:
    """Cherche par dichotomie un biais d'approche dont le taux de succès tombe dans `band`.

    Chaque évaluation rejoue les mêmes tirages (même graine), le taux de succès
    est supposé décroissant avec le biais.

    Returns
    -------
    bias_deg: float
        Biais retenu (le dernier essayé si la bande n'est pas atteinte).
    rate: float
        Taux de succès du démonstrateur avec ce biais.
    """
    low, high = band
    bias, rate = 0.5 * (lo + hi), 0.0
    for it in range(max_iter):
        bias = 0.5 * (lo + hi)
        episodes = generate_demos(
            env, "suboptimal", n_episodes, make_rng(seed, "demos"), bias, noise
        )
        rate = demo_success_rate(episodes)
        logging.info(f"Calibrage {it}: biais {bias:.2f}°, succès {rate:.3f}")
        if low <= rate <= high:
            return bias, rate
        if rate > high:
            lo = bias
        else:
            hi = bias
    logging.warning(f"Calibrage non convergé: biais {bias:.2f}°, succès {rate:.3f}")
    return bias, rate


def demos_to_frame(episodes: List[DemoEpisode]) -> pd.DataFrame:
    """Une ligne par paire (s, bloc)."""
    rows = [
        {
            "episode": i,
            "step": t,
            "success": ep.success,
            "s": ep.states[t].tolist(),
            "chunk": ep.chunks[t].tolist(),
        }
        for i, ep in enumerate(episodes)
        for t in range(ep.states.shape[0])
    ]
    df = pd.DataFrame(rows, columns=["episode", "step", "success", "s", "chunk"])
    return df.astype(DTYPE_DEMO)


def write_demos(episodes: List[DemoEpisode], fp_out: Path) -> None:
    """Écrit les démonstrations en JSON lines."""
    write_jsonl(demos_to_frame(episodes), fp_out)


def read_demos(fp_in: Path) -> Tuple[np.ndarray, np.ndarray]:
    """Charge un fichier de démonstrations.

    Returns
    -------
    states: np.ndarray
        (n, d)
    chunks: np.ndarray
        (n, H·d_a)
    """
    fp_in = Path(fp_in)
    if not fp_in.is_file():
        raise FileNotFoundError(f"Le fichier en entrée {fp_in} n'existe pas.")
    df = read_jsonl(fp_in, DTYPE_DEMO)
    if df.empty:
        raise ValueError(f"Le fichier de démonstrations {fp_in} est vide.")
    return np.array(df["s"].tolist(), dtype=np.float64), np.array(df["chunk"].tolist(), dtype=np.float64)


def export_calibrated_demos(
    env: Env,
    seed: int,
    fp_out: Path,
    n_episodes: int = 500,
    noise: float = SUBOPTIMAL_NOISE,
    redo: bool = False,
) -> Tuple[float, float]:
    """Calibre le biais sous-optimal puis écrit `n_episodes` démonstrations avec ce biais.

    Un fichier de sortie existant n'est écrasé qu'avec `redo`.
    """
    fp_out = Path(fp_out)
    if fp_out.is_file() and not redo:
        raise FileExistsError(f"Le fichier de sortie {fp_out} existe déjà. Pour l'écraser, ajoutez --redo.")
    bias, rate = calibrate_suboptimal(env, seed, n_episodes=n_episodes, noise=noise)
    episodes = generate_demos(env, "suboptimal", n_episodes, make_rng(seed, "demos"), bias, noise)
    fp_out.parent.mkdir(parents=True, exist_ok=True)
    write_demos(episodes, fp_out)
    logging.info(f"{len(episodes)} démonstrations (biais {bias:.2f}°) écrites dans {fp_out}")
    return bias, rate


if __name__ == "__main__":
    # log
    dir_log = Path(__file__).resolve().parents[2] / "logs"
    dir_log.mkdir(exist_ok=True)
    logging.basicConfig(
        filename=f"{dir_log}/demos_{datetime.now().isoformat()}.log",
        encoding="utf-8",
        level=logging.DEBUG,
    )
    logging.captureWarnings(True)

    parser = argparse.ArgumentParser()
    parser.add_argument("out_file", help="Fichier JSON lines des démonstrations calibrées")
    parser.add_argument("--env", choices=["pointreach", "pushblock"], default="pointreach")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--episodes", type=int, default=500)
    parser.add_argument("--noise", type=float, default=SUBOPTIMAL_NOISE)
    parser.add_argument(
        "--redo",
        action="store_true",
        help="Recalibrer et écraser le fichier de sortie",
    )
    args = parser.parse_args()

    env = make_env(args.env)
    bias, rate = export_calibrated_demos(
        env, args.seed, Path(args.out_file).resolve(), args.episodes, args.noise, args.redo
    )
    print(f"biais={bias:.2f} succès={rate:.3f}")
