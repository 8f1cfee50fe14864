"""
# Export et statistiques des latents d'évaluation.

Un enregistrement par latent: identifiant d'exécution, phase ("prior", "mid",
"final"), épisode, pas, succès de l'épisode et les D valeurs du latent. Les
projections (t-SNE, ACP) sont laissées aux outils externes ; `summarize_latents`
fournit les statistiques de dispersion par groupe (phase, succès).
"""

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from src.utils.file_utils import read_jsonl, write_jsonl

PHASES = ("prior", "mid", "final")

DTYPE_LATENT = {
    "run_id": "string",
    "phase": "string",
    "episode": "int64",
    "step": "int64",
    "success": "bool",
}

DTYPE_LATENT_STATS = {
    "phase": "string",
    "success": "bool",
    "count": "int64",
    "dispersion": "float64",
    "mean_variance": "float64",
    "norm_mean": "float64",
    "norm_std": "float64",
    "temporal_diff": "float64",
    "mahalanobis_to_success": "float64",
}


def latent_records(run_id: str, phase: str, eval_result) -> List[Dict]:
    """Enregistrements des latents d'une évaluation."""
    if phase not in PHASES:
        raise ValueError(f"Phase inconnue: {phase} (attendu: {PHASES})")
    return [
        {
            "run_id": run_id,
            "phase": phase,
            "episode": ep,
            "step": t,
            "success": bool(eval_result.successes[ep]),
            "values": lat[t].tolist(),
        }
        for ep, lat in enumerate(eval_result.latents)
        for t in range(lat.shape[0])
    ]


def latents_frame(records: List[Dict]) -> pd.DataFrame:
    df = pd.DataFrame(records, columns=list(DTYPE_LATENT) + ["values"])
    return df.astype(DTYPE_LATENT)


def write_latents(records: List[Dict], fp_out: Path, append: bool = False) -> None:
    """Écrit (ou ajoute à) un fichier JSON lines de latents."""
    write_jsonl(latents_frame(records), fp_out, append)
    logging.info(f"{len(records)} latents écrits dans {fp_out}")


def read_latents(fp_in: Path) -> pd.DataFrame:
    fp_in = Path(fp_in)
    if not fp_in.is_file():
        raise FileNotFoundError(f"Le fichier en entrée {fp_in} n'existe pas.")
    if fp_in.stat().st_size == 0:
        return latents_frame([])
    df = read_jsonl(fp_in)
    return df.astype(DTYPE_LATENT)


def _group_stats(values: np.ndarray, episodes: np.ndarray, steps: np.ndarray) -> Dict[str, float]:
    centroid = values.mean(axis=0)
    norms = np.linalg.norm(values, axis=1)
    diffs = []
    for ep in np.unique(episodes):
        sel = episodes == ep
        seq = values[sel][np.argsort(steps[sel], kind="stable")]
        if seq.shape[0] > 1:
            diffs.extend(np.linalg.norm(np.diff(seq, axis=0), axis=1))
    return {
        "count": int(values.shape[0]),
        "dispersion": float(np.mean(np.linalg.norm(values - centroid, axis=1))),
        "mean_variance": float(np.mean(values.var(axis=0))),
        "norm_mean": float(norms.mean()),
        "norm_std": float(norms.std()),
        "temporal_diff": float(np.mean(diffs)) if diffs else 0.0,
    }


def summarize_latents(df: pd.DataFrame) -> pd.DataFrame:
    """Statistiques par (phase, succès).

    Colonnes: effectif, dispersion (distance moyenne au centroïde), variance
    moyenne par dimension, moyenne et écart-type des normes, norme moyenne des
    différences entre latents consécutifs d'un même épisode, distance de
    Mahalanobis moyenne au centroïde des latents réussis de la phase "final"
    (NaN si ce groupe est vide).
    """
    rows = []
    if df.empty:
        return pd.DataFrame(rows, columns=list(DTYPE_LATENT_STATS)).astype(DTYPE_LATENT_STATS)
    ref = df[(df["phase"] == "final") & (df["success"])]
    ref_mean, ref_prec = None, None
    if len(ref) > 0:
        ref_values = np.array(ref["values"].tolist(), dtype=np.float64)
        ref_mean = ref_values.mean(axis=0)
        cov = np.atleast_2d(np.cov(ref_values, rowvar=False)) if len(ref) > 1 else np.eye(ref_values.shape[1])
        ref_prec = np.linalg.pinv(cov)
    order = {p: i for i, p in enumerate(PHASES)}
    for (phase, success), group in sorted(
        df.groupby(["phase", "success"]), key=lambda kv: (order.get(kv[0][0], 99), kv[0][1])
    ):
        values = np.array(group["values"].tolist(), dtype=np.float64)
        row = {"phase": phase, "success": bool(success)}
        row.update(_group_stats(values, group["episode"].to_numpy(), group["step"].to_numpy()))
        if ref_mean is not None:
            centered = values - ref_mean
            row["mahalanobis_to_success"] = float(
                np.mean(np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", centered, ref_prec, centered), 0.0)))
            )
        else:
            row["mahalanobis_to_success"] = float("nan")
        rows.append(row)
    return pd.DataFrame(rows, columns=list(DTYPE_LATENT_STATS)).astype(DTYPE_LATENT_STATS)
