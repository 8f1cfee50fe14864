"""
# Configuration de l'entraînement.

Chaque champ porte sa valeur par défaut et son domaine autorisé dans ses
métadonnées ; `validate` relève toutes les erreurs d'un coup.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Tuple

ALGOS = ("fpo", "rwfm", "gppo")
ENV_NAMES = ("pointreach", "pushblock")


class ConfigError(ValueError):
    """Configuration invalide.

    Attributes
    ----------
    issues: list of (str, Any, str)
        Champs fautifs: (nom, valeur, domaine autorisé).
    """

    def __init__(self, issues: List[Tuple[str, Any, str]]):
        self.issues = issues
        details = "; ".join(f"{name}={value!r} (attendu: {allowed})" for name, value, allowed in issues)
        super().__init__(f"Configuration invalide: {details}")


def _real(lo=None, hi=None, lo_open=False, hi_open=False):
    return {"kind": "real", "lo": lo, "hi": hi, "lo_open": lo_open, "hi_open": hi_open}


def _int(lo=None, hi=None):
    return {"kind": "int", "lo": lo, "hi": hi}


def _choice(*choices):
    return {"kind": "choice", "choices": choices}


def _flag():
    return {"kind": "bool"}


def _sizes():
    return {"kind": "sizes"}


def _seeds():
    return {"kind": "seeds"}


@dataclass
class TrainerConfig:
    # algorithme et environnement
    algo: str = field(default="fpo", metadata=_choice(*ALGOS))
    env: str = field(default="pointreach", metadata=_choice(*ENV_NAMES))
    reward_mode: str = field(default="sparse", metadata=_choice("sparse", "shaped"))
    chunk_len: int = field(default=4, metadata=_int(1))
    horizon: int = field(default=100, metadata=_int(1))
    goal_tol: float = field(default=0.1, metadata=_real(0.0, lo_open=True))
    n_envs: int = field(default=8, metadata=_int(1))
    # objectif
    gamma: float = field(default=0.99, metadata=_real(0.0, 1.0, True, True))
    lam: float = field(default=0.95, metadata=_real(0.0, 1.0))
    beta: float = field(default=1.0, metadata=_real(0.0))
    eps_clip: float = field(default=0.2, metadata=_real(0.0, 1.0, True, True))
    sigma_floor: float = field(default=1e-8, metadata=_real(0.0, lo_open=True))
    z_max: float = field(default=5.0, metadata=_real(0.0, lo_open=True))
    # acteur
    eta: float = field(default=0.05, metadata=_real(0.0, lo_open=True))
    explore_steps: int = field(default=4, metadata=_int(0))
    sigma_explore: float = field(default=0.05, metadata=_real(0.0))
    explore_tau: float = field(default=1.0, metadata=_real(0.0, 1.0))
    n_sample_steps: int = field(default=8, metadata=_int(1))
    m_draws: int = field(default=4, metadata=_int(1))
    # critiques
    n_critics: int = field(default=2, metadata=_int(1))
    tau_polyak: float = field(default=0.005, metadata=_real(0.0, 1.0, lo_open=True))
    # réseaux
    actor_hidden: List[int] = field(default_factory=lambda: [64, 64], metadata=_sizes())
    critic_hidden: List[int] = field(default_factory=lambda: [64, 64], metadata=_sizes())
    decoder_hidden: List[int] = field(default_factory=lambda: [64, 64], metadata=_sizes())
    activation: str = field(default="tanh", metadata=_choice("tanh", "relu"))
    decoder_mode: str = field(default="net", metadata=_choice("net", "identity"))
    # boucle d'entraînement
    window: int = field(default=8, metadata=_int(1))
    t_rollout: int = field(default=512, metadata=_int(0))
    k_update: int = field(default=32, metadata=_int(0))
    batch_size: int = field(default=256, metadata=_int(1))
    actor_lr: float = field(default=3e-4, metadata=_real(0.0))
    critic_lr: float = field(default=1e-3, metadata=_real(0.0))
    grad_clip: float = field(default=10.0, metadata=_real(0.0))
    budget: int = field(default=200_000, metadata=_int(0))
    eval_interval: int = field(default=10_000, metadata=_int(1))
    eval_episodes: int = field(default=50, metadata=_int(1))
    seed: int = field(default=0, metadata=_int(0, 2**63 - 1))
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4], metadata=_seeds())
    # ablations
    no_ratio: bool = field(default=False, metadata=_flag())
    no_clip: bool = field(default=False, metadata=_flag())
    single_step: bool = field(default=False, metadata=_flag())
    single_critic: bool = field(default=False, metadata=_flag())
    # clonage comportemental
    demo_episodes: int = field(default=200, metadata=_int(1))
    demo_quality: str = field(default="suboptimal", metadata=_choice("expert", "suboptimal"))
    suboptimal_bias_deg: float = field(default=58.0, metadata=_real(0.0, 180.0))
    suboptimal_noise: float = field(default=0.3, metadata=_real(0.0))
    bc_epochs: int = field(default=200, metadata=_int(0))
    bc_lr: float = field(default=1e-3, metadata=_real(0.0))
    bc_batch_size: int = field(default=256, metadata=_int(1))
    # références
    rwfm_temperature: float = field(default=1.0, metadata=_real(0.0, lo_open=True))
    gppo_init_log_std: float = field(default=-1.0, metadata=_real(-10.0, 2.0))

    @property
    def effective_explore_steps(self) -> int:
        """K, ramené à 1 par l'ablation `single_step`."""
        return 1 if self.single_step else self.explore_steps

    @property
    def effective_n_critics(self) -> int:
        """M, ramené à 1 par l'ablation `single_critic`."""
        return 1 if self.single_critic else self.n_critics

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def replace(self, **changes) -> "TrainerConfig":
        data = self.to_dict()
        data.update(changes)
        return config_from_dict(data)

    def validate(self) -> None:
        issues = []
        for f in fields(self):
            value = getattr(self, f.name)
            allowed = _check(f.metadata, value)
            if allowed is not None:
                issues.append((f.name, value, allowed))
        if issues:
            raise ConfigError(issues)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _describe(meta) -> str:
    kind = meta["kind"]
    if kind == "choice":
        return " | ".join(meta["choices"])
    if kind == "bool":
        return "true | false"
    if kind == "sizes":
        return "liste non vide d'entiers >= 1"
    if kind == "seeds":
        return "liste d'au moins 1 entier >= 0"
    lo, hi = meta["lo"], meta["hi"]
    left = "-inf" if lo is None else lo
    right = "+inf" if hi is None else hi
    if kind == "int":
        return f"entier dans [{left}, {right}]"
    lb = "(" if meta["lo_open"] or lo is None else "["
    rb = ")" if meta["hi_open"] or hi is None else "]"
    return f"réel dans {lb}{left}, {right}{rb}"


def _check(meta, value):
    """None si la valeur est valide, sinon la description du domaine."""
    kind = meta["kind"]
    ok = True
    if kind == "choice":
        ok = value in meta["choices"]
    elif kind == "bool":
        ok = isinstance(value, bool)
    elif kind == "sizes":
        ok = isinstance(value, list) and len(value) > 0 and all(_is_int(v) and v >= 1 for v in value)
    elif kind == "seeds":
        ok = isinstance(value, list) and len(value) > 0 and all(_is_int(v) and v >= 0 for v in value)
    elif kind == "int":
        ok = _is_int(value)
        ok = ok and (meta["lo"] is None or value >= meta["lo"])
        ok = ok and (meta["hi"] is None or value <= meta["hi"])
    elif kind == "real":
        ok = _is_real(value) and value == value
        if ok and meta["lo"] is not None:
            ok = value > meta["lo"] if meta["lo_open"] else value >= meta["lo"]
        if ok and meta["hi"] is not None:
            ok = value < meta["hi"] if meta["hi_open"] else value <= meta["hi"]
    return None if ok else _describe(meta)


def config_from_dict(data: Dict[str, Any]) -> TrainerConfig:
    """Construit et valide une configuration ; clés inconnues refusées."""
    known = {f.name: f for f in fields(TrainerConfig)}
    issues = [(key, value, "clé inconnue") for key, value in data.items() if key not in known]
    if issues:
        raise ConfigError(issues)
    kwargs = {}
    for key, value in data.items():
        # réels écrits sans décimale dans le fichier (ex: beta: 1)
        if known[key].metadata["kind"] == "real" and _is_int(value):
            value = float(value)
        kwargs[key] = value
    cfg = TrainerConfig(**kwargs)
    cfg.validate()
    return cfg
