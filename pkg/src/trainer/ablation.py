"""
# Suite d'ablations.

Chaque variante retire une composante de FPO, à budget, architectures et
hyperparamètres identiques:

* full: FPO complet ;
* no_ratio: ρ ≡ 1 ;
* no_clip: surrogate sans troncature ;
* k1: un seul pas d'exploration (K = 1) ;
* single_critic: un seul critique (M = 1).

Pour un indice de graine donné, toutes les variantes partagent le même a
priori et les mêmes graines d'environnement.
"""

import logging
from pathlib import Path
from typing import Dict, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.trainer.config import TrainerConfig
from src.trainer.fpo import build_prior, train

VARIANTS: Dict[str, Dict[str, bool]] = {
    "full": {},
    "no_ratio": {"no_ratio": True},
    "no_clip": {"no_clip": True},
    "k1": {"single_step": True},
    "single_critic": {"single_critic": True},
}

ABLATION_FLAGS = ("no_ratio", "no_clip", "single_step", "single_critic")


def run_ablation_suite(cfg: TrainerConfig, seeds: Sequence[int]) -> pd.DataFrame:
    """Entraîne chaque variante sur chaque graine et classe les variantes.

    Parameters
    ----------
    cfg: TrainerConfig
        Configuration de base (les drapeaux d'ablation sont remis à zéro).
    seeds: sequence of int
        Au moins 3 graines.

    Returns
    -------
    table: pd.DataFrame
        Une ligne par variante: `variant`, `median` (médiane du succès final),
        `seed_<k>` (NaN si l'exécution a échoué), `rank` (1 = meilleure médiane).
    """
    seeds = list(seeds)
    if len(seeds) < 3:
        raise ValueError(f"Au moins 3 graines sont requises, {len(seeds)} fournies")
    base = cfg.replace(algo="fpo", **{flag: False for flag in ABLATION_FLAGS})
    results = {name: {} for name in VARIANTS}
    runs = [(seed, name) for seed in seeds for name in VARIANTS]
    prior, prior_seed = None, None
    for seed, name in tqdm(runs, desc="ablations", disable=None):
        if prior_seed != seed:
            prior, prior_seed = build_prior(base, seed), seed
        variant_cfg = base.replace(seed=seed, **VARIANTS[name])
        try:
            res = train(variant_cfg, prior=prior, seed=seed)
            results[name][seed] = res.metrics.evals[-1]["success_rate"]
        except Exception as err:
            logging.error(f"Ablation {name}, graine {seed}: échec ({err})")
            results[name][seed] = float("nan")
        logging.info(f"Ablation {name}, graine {seed}: succès final {results[name][seed]}")
    rows = []
    for name in VARIANTS:
        values = [results[name][seed] for seed in seeds]
        finite = [v for v in values if np.isfinite(v)]
        row = {"variant": name, "median": float(np.median(finite)) if finite else float("nan")}
        row.update({f"seed_{seed}": v for seed, v in zip(seeds, values)})
        rows.append(row)
    table = pd.DataFrame(rows)
    table["rank"] = table["median"].rank(ascending=False, method="min", na_option="bottom").astype("int64")
    return table.sort_values(["rank", "variant"], kind="stable").reset_index(drop=True)


def write_ablation_table(table: pd.DataFrame, fp_out: Path) -> None:
    table.to_csv(fp_out, sep=";", index=False, float_format="%.17g", lineterminator="\n")
