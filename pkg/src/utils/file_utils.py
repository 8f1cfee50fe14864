"""
# Empreintes (hachage) de textes et de tableaux, fichiers JSON lines.

Les fichiers JSON lines sont écrits avec la représentation la plus courte
de chaque flottant qui se relit à l'identique (`repr`), et relus avec le
convertisseur exact de pandas (`precise_float`): l'aller-retour est sans
perte en float64.
"""

import hashlib
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd


def _new_digest(digest: str, digest_size: int):
    if digest == "blake2b":
        # constructeur direct, digest_size configurable pour les algos blake2
        return hashlib.blake2b(digest_size=digest_size)
    return hashlib.new(digest)


def get_text_digest(text: str, digest: str = "blake2b", digest_size: int = 10) -> str:
    """Hachage d'une chaîne (encodée en UTF-8), ex: dump canonique d'une configuration."""
    f_digest = _new_digest(digest, digest_size)
    f_digest.update(text.encode("utf-8"))
    return f_digest.hexdigest()


def get_array_digest(arr: np.ndarray, digest: str = "blake2b", digest_size: int = 10) -> str:
    """Hachage des octets d'un tableau (float64 petit-boutiste), ex: paramètres gelés."""
    f_digest = _new_digest(digest, digest_size)
    f_digest.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return f_digest.hexdigest()


def _to_native(obj):
    # scalaires et tableaux numpy restants
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Type non sérialisable en JSON: {type(obj).__name__}")


def write_jsonl(df: pd.DataFrame, fp_out: Path, append: bool = False) -> None:
    """Écrit (ou ajoute à) un fichier JSON lines, un enregistrement par ligne du tableau."""
    with open(fp_out, mode="a" if append else "w", encoding="utf-8") as f:
        for rec in df.to_dict(orient="records"):
            f.write(json.dumps(rec, ensure_ascii=False, default=_to_native) + "\n")


def read_jsonl(fp_in: Path, dtype: Optional[Dict[str, str]] = None) -> pd.DataFrame:
    """Relit un fichier JSON lines écrit par `write_jsonl`, flottants exacts."""
    dtype = dtype if dtype is not None else False
    return pd.read_json(fp_in, orient="records", lines=True, dtype=dtype, precise_float=True)
