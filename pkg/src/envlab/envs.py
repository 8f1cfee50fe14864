"""
# Environnements de contrôle continu à récompense éparse.

* PointReach: point matériel à double intégrateur qui doit atteindre une cible.
  État [px, py, vx, vy, gx, gy] (d = 6).
* PushBlock: le même point doit pousser un bloc jusque dans une zone ; le bloc
  ne bouge que lorsque l'agent le touche. État [px, py, vx, vy, bx, by, zx, zy]
  (d = 8).

Dynamique par tick (dt = 0.1), action a écrêtée à ±1 composante par composante:
v ← v + dt·a, puis p ← p + dt·v ; une position sortant de l'arène [-1, 1]² est
ramenée sur le bord et la composante de vitesse correspondante est annulée.

En mode "sparse", r = 1 au tick où le but est atteint (l'épisode se termine),
0 sinon. En mode "shaped", r = (distance précédente - distance) + 1 au succès.
L'épisode est tronqué (non terminal) après `horizon` ticks.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

ARENA = 1.0
DT = 0.1
ACTION_DIM = 2
REWARD_MODES = ("sparse", "shaped")

# tirage des positions initiales
SPAWN = 0.8
MIN_GOAL_DIST = 0.5

# PushBlock
CONTACT_RADIUS = 0.15
BLOCK_SPAWN = 0.5
ZONE_SPAWN = 0.7


class StepResult(NamedTuple):
    state: np.ndarray
    reward: float
    done: bool  # terminal (succès)
    truncated: bool  # limite de temps
    success: bool


class ChunkResult(NamedTuple):
    state: np.ndarray
    reward: float
    done: bool
    truncated: bool
    success: bool
    n_ticks: int


@dataclass
class Env:
    """Base commune des environnements.

    Attributes
    ----------
    chunk_len: int
        Nombre H d'actions élémentaires par latent.
    horizon: int
        Nombre maximal de ticks par épisode.
    goal_tol: float
        Tolérance δ_goal du prédicat de succès.
    reward_mode: str
        "sparse" ou "shaped".
    pinned_state: np.ndarray, optional
        État initial imposé (mode débogage).
    """

    chunk_len: int = 4
    horizon: int = 100
    goal_tol: float = 0.1
    reward_mode: str = "sparse"
    pinned_state: Optional[np.ndarray] = None
    name: str = field(default="env", init=False)
    state_dim: int = field(default=0, init=False)
    _state: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    tick: int = field(default=0, init=False)
    finished: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.chunk_len < 1:
            raise ValueError(f"chunk_len doit être >= 1: {self.chunk_len}")
        if self.horizon < 0:
            raise ValueError(f"horizon doit être >= 0: {self.horizon}")
        if self.goal_tol <= 0:
            raise ValueError(f"goal_tol doit être > 0: {self.goal_tol}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"Mode de récompense inconnu: {self.reward_mode} (attendu: {REWARD_MODES})")
        if self.pinned_state is not None:
            self.pinned_state = np.asarray(self.pinned_state, dtype=np.float64)
            if self.pinned_state.shape != (self.state_dim,):
                raise ValueError(
                    f"État imposé de forme {self.pinned_state.shape}, attendu ({self.state_dim},)"
                )

    @property
    def action_dim(self) -> int:
        return ACTION_DIM

    @property
    def latent_dim(self) -> int:
        return self.chunk_len * ACTION_DIM

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Tire un état initial (ou reprend l'état imposé) et remet le compteur à 0."""
        if self.pinned_state is not None:
            self._state = self.pinned_state.copy()
        else:
            self._state = self._sample_initial(rng)
        self.tick = 0
        self.finished = self.horizon == 0
        return self.state

    def step(self, action: np.ndarray) -> StepResult:
        """Avance d'un tick."""
        if self._state is None:
            raise RuntimeError("step appelé avant reset")
        if self.finished:
            raise RuntimeError("step appelé sur un épisode terminé")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (ACTION_DIM,):
            raise ValueError(f"Action de forme {a.shape}, attendu ({ACTION_DIM},)")
        a = np.clip(a, -1.0, 1.0)
        dist_before = self.goal_distance()
        self._advance(a)
        self.tick += 1
        dist = self.goal_distance()
        success = bool(dist <= self.goal_tol)
        if self.reward_mode == "sparse":
            reward = 1.0 if success else 0.0
        else:
            reward = (dist_before - dist) + (1.0 if success else 0.0)
        truncated = (not success) and self.tick >= self.horizon
        self.finished = success or truncated
        return StepResult(self.state, reward, success, truncated, success)

    def step_chunk(self, actions: np.ndarray) -> ChunkResult:
        """Exécute un bloc de H actions (moins si l'épisode se termine en cours de bloc)."""
        actions = np.asarray(actions, dtype=np.float64).reshape(-1, ACTION_DIM)
        total = 0.0
        n = 0
        res = None
        for a in actions:
            res = self.step(a)
            total += res.reward
            n += 1
            if res.done or res.truncated:
                break
        return ChunkResult(res.state, total, res.done, res.truncated, res.success, n)

    @staticmethod
    def _integrate(pos: np.ndarray, vel: np.ndarray, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        vel = vel + DT * a
        pos = pos + DT * vel
        hit = np.abs(pos) > ARENA
        pos = np.clip(pos, -ARENA, ARENA)
        vel = np.where(hit, 0.0, vel)
        return pos, vel

    def _sample_initial(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, a: np.ndarray) -> None:
        raise NotImplementedError

    def goal_distance(self) -> float:
        raise NotImplementedError


def _spawn_pair(rng: np.random.Generator, spawn_a: float, spawn_b: float) -> Tuple[np.ndarray, np.ndarray]:
    # rejet jusqu'à une distance minimale entre les deux points
    while True:
        p = rng.uniform(-spawn_a, spawn_a, size=2)
        q = rng.uniform(-spawn_b, spawn_b, size=2)
        if np.linalg.norm(p - q) >= MIN_GOAL_DIST:
            return p, q


@dataclass
class PointReach(Env):
    """Atteindre la cible g: succès si ‖p - g‖ <= goal_tol."""

    def __post_init__(self):
        self.name = "pointreach"
        self.state_dim = 6
        super().__post_init__()

    def _sample_initial(self, rng):
        p, g = _spawn_pair(rng, SPAWN, SPAWN)
        return np.concatenate([p, np.zeros(2), g])

    def _advance(self, a):
        pos, vel = self._integrate(self._state[0:2], self._state[2:4], a)
        self._state = np.concatenate([pos, vel, self._state[4:6]])

    def goal_distance(self) -> float:
        return float(np.linalg.norm(self._state[0:2] - self._state[4:6]))


@dataclass
class PushBlock(Env):
    """Pousser le bloc b dans la zone z: succès si ‖b - z‖ <= goal_tol.

    Le contact est positionnel: si l'agent est à moins de CONTACT_RADIUS du
    bloc, le bloc est repoussé sur le cercle de contact, dans la direction
    agent → bloc.
    """

    def __post_init__(self):
        self.name = "pushblock"
        self.state_dim = 8
        super().__post_init__()

    def _sample_initial(self, rng):
        b, z = _spawn_pair(rng, BLOCK_SPAWN, ZONE_SPAWN)
        while True:
            p = rng.uniform(-SPAWN, SPAWN, size=2)
            if np.linalg.norm(p - b) > 2 * CONTACT_RADIUS:
                break
        return np.concatenate([p, np.zeros(2), b, z])

    def _advance(self, a):
        pos, vel = self._integrate(self._state[0:2], self._state[2:4], a)
        block = self._state[4:6]
        offset = block - pos
        dist = np.linalg.norm(offset)
        if dist < CONTACT_RADIUS:
            if dist > 0:
                direction = offset / dist
            else:
                speed = np.linalg.norm(vel)
                direction = vel / speed if speed > 0 else np.array([1.0, 0.0])
            block = np.clip(pos + CONTACT_RADIUS * direction, -ARENA, ARENA)
        self._state = np.concatenate([pos, vel, block, self._state[6:8]])

    def goal_distance(self) -> float:
        return float(np.linalg.norm(self._state[4:6] - self._state[6:8]))


ENVS = {"pointreach": PointReach, "pushblock": PushBlock}


def make_env(name: str, **kwargs) -> Env:
    """Instancie un environnement par son nom ("pointreach" ou "pushblock")."""
    if name not in ENVS:
        raise ValueError(f"Environnement inconnu: {name} (attendu: {tuple(ENVS)})")
    return ENVS[name](**kwargs)


def env_reset(env: Env, rng: np.random.Generator) -> np.ndarray:
    return env.reset(rng)


def env_step(env: Env, action: np.ndarray) -> StepResult:
    return env.step(action)
