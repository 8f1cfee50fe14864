"""
# Fichiers de métriques.

Deux fichiers texte séparés par des `;`:
* `metrics.csv`: une ligne par point d'évaluation ;
* `metrics_updates.csv`: une ligne par phase de mise à jour.

Chaque fichier commence par une ligne `# config_hash=<hex> version=<v>`, puis
la ligne d'en-tête. Les réels sont écrits avec 17 chiffres significatifs et
relus sans perte (`float_precision="round_trip"`).
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src import __version__

DTYPE_EVAL = {
    "env_ticks": "int64",
    "success_rate": "float64",
    "mean_return": "float64",
    "mean_length": "float64",
}

DTYPE_UPDATE = {
    "phase": "int64",
    "env_ticks": "int64",
    "n_steps": "int64",
    "actor_loss": "float64",
    "critic_loss": "float64",
    "mean_rho": "float64",
    "clip_fraction": "float64",
    "mean_delta": "float64",
    "adv_mean": "float64",
    "adv_std": "float64",
    "actor_grad_norm": "float64",
    "critic_grad_norm": "float64",
    "entropy": "float64",
    "n_skipped": "int64",
}

SEP = ";"


class MetricsFormatError(ValueError):
    """Ligne mal formée dans un fichier de métriques."""

    def __init__(self, path, line: int, msg: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}, ligne {line}: {msg}")


@dataclass
class RunMetrics:
    """Métriques d'une exécution.

    Attributes
    ----------
    evals: list of dict
        Points d'évaluation (colonnes de DTYPE_EVAL), ticks strictement croissants.
    updates: list of dict
        Phases de mise à jour (colonnes de DTYPE_UPDATE).
    config_hash: str
        Empreinte de la configuration.
    version: str
        Version du code.
    """

    evals: List[Dict] = field(default_factory=list)
    updates: List[Dict] = field(default_factory=list)
    config_hash: str = ""
    version: str = __version__

    def add_eval(self, env_ticks: int, success_rate: float, mean_return: float, mean_length: float) -> None:
        if self.evals and env_ticks <= self.evals[-1]["env_ticks"]:
            raise ValueError(
                f"Ticks d'évaluation non croissants: {env_ticks} après {self.evals[-1]['env_ticks']}"
            )
        row = {
            "env_ticks": int(env_ticks),
            "success_rate": float(success_rate),
            "mean_return": float(mean_return),
            "mean_length": float(mean_length),
        }
        _check_finite_row(row)
        self.evals.append(row)

    def add_update(self, phase: int, env_ticks: int, stats) -> None:
        row = {"phase": int(phase), "env_ticks": int(env_ticks)}
        for key in DTYPE_UPDATE:
            if key not in row:
                row[key] = getattr(stats, key)
        row = {k: (int(v) if DTYPE_UPDATE[k] == "int64" else float(v)) for k, v in row.items()}
        _check_finite_row(row)
        self.updates.append(row)

    def eval_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.evals, columns=list(DTYPE_EVAL)).astype(DTYPE_EVAL)

    def update_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.updates, columns=list(DTYPE_UPDATE)).astype(DTYPE_UPDATE)


def _check_finite_row(row: Dict) -> None:
    for key, value in row.items():
        if not np.isfinite(value):
            raise ValueError(f"Métrique non finie: {key}={value}")


def updates_path(path: Path) -> Path:
    """Chemin du fichier des mises à jour associé à `path` (ex: metrics_updates.csv)."""
    path = Path(path)
    return path.with_name(f"{path.stem}_updates{path.suffix}")


def _write_table(df: pd.DataFrame, path: Path, config_hash: str, version: str) -> None:
    with open(path, mode="w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash={config_hash} version={version}\n")
        df.to_csv(f, sep=SEP, index=False, float_format="%.17g", lineterminator="\n")


def write_metrics(metrics: RunMetrics, path: Path) -> None:
    """Écrit `path` (évaluations) et son fichier compagnon `<stem>_updates` (mises à jour)."""
    path = Path(path)
    _write_table(metrics.eval_frame(), path, metrics.config_hash, metrics.version)
    _write_table(metrics.update_frame(), updates_path(path), metrics.config_hash, metrics.version)


def _parse_header(path: Path) -> Dict[str, str]:
    with open(path, encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
    if not first.startswith("# "):
        raise MetricsFormatError(path, 1, f"en-tête de provenance attendu, lu {first!r}")
    meta = {}
    for item in first[2:].split():
        key, sep, value = item.partition("=")
        if not sep:
            raise MetricsFormatError(path, 1, f"champ d'en-tête mal formé {item!r}")
        meta[key] = value
    for key in ("config_hash", "version"):
        if key not in meta:
            raise MetricsFormatError(path, 1, f"champ d'en-tête manquant {key!r}")
    return meta


def _read_table(path: Path, dtypes: Dict[str, str]) -> pd.DataFrame:
    try:
        raw = pd.read_csv(path, sep=SEP, skiprows=1, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise MetricsFormatError(path, 0, f"structure invalide ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise MetricsFormatError(path, 2, "ligne d'en-tête manquante") from exc
    if list(raw.columns) != list(dtypes):
        raise MetricsFormatError(path, 2, f"colonnes {list(raw.columns)}, attendu {list(dtypes)}")
    for i, row in enumerate(raw.itertuples(index=False)):
        # ligne 1: provenance, ligne 2: en-tête
        line = i + 3
        for col, value in zip(dtypes, row):
            if not isinstance(value, str) or value == "":
                raise MetricsFormatError(path, line, f"valeur manquante pour {col}")
            try:
                parsed = int(value) if dtypes[col] == "int64" else float(value)
            except ValueError as exc:
                raise MetricsFormatError(path, line, f"{col}={value!r} illisible") from exc
            if not np.isfinite(parsed):
                raise MetricsFormatError(path, line, f"{col}={value!r} non fini")
    return pd.read_csv(
        path, sep=SEP, skiprows=1, dtype=dtypes, float_precision="round_trip"
    )


def read_metrics(path: Path) -> RunMetrics:
    """Relit un fichier de métriques (et son compagnon des mises à jour s'il existe).

    Raises
    ------
    MetricsFormatError
        Ligne mal formée, avec son numéro.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Le fichier en entrée {path} n'existe pas.")
    meta = _parse_header(path)
    evals = _read_table(path, DTYPE_EVAL)
    metrics = RunMetrics(config_hash=meta["config_hash"], version=meta["version"])
    metrics.evals = _records(evals, DTYPE_EVAL)
    fp_updates = updates_path(path)
    if fp_updates.is_file():
        _parse_header(fp_updates)
        metrics.updates = _records(_read_table(fp_updates, DTYPE_UPDATE), DTYPE_UPDATE)
    return metrics


def _records(df: pd.DataFrame, dtypes: Dict[str, str]) -> List[Dict]:
    return [
        {k: (int(v) if dtypes[k] == "int64" else float(v)) for k, v in rec.items()}
        for rec in df.to_dict(orient="records")
    ]


def eval_frame_from_file(path: Path, smooth: Optional[int] = None) -> pd.DataFrame:
    """Table des évaluations, avec colonnes lissées (moyenne glissante) si `smooth` est donné."""
    df = read_metrics(path).eval_frame()
    if smooth:
        for col in ("success_rate", "mean_return"):
            df[f"{col}_smooth"] = df[col].rolling(window=smooth, min_periods=1).mean()
    return df
