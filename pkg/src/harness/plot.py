"""
# Courbes d'apprentissage (SVG statique).

Taux de succès et retour moyen en fonction des ticks d'environnement: série
brute en trait fin, série lissée (moyenne glissante) par-dessus.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.harness.metrics_io import eval_frame_from_file  # noqa: E402

# sortie SVG reproductible (identifiants internes)
matplotlib.rcParams["svg.hashsalt"] = "fpo-curves"


def plot_metrics(fp_metrics: Path, fp_svg: Path, smooth: int = 5) -> Path:
    """Trace les courbes d'un fichier de métriques.

    Parameters
    ----------
    fp_metrics: Path
        Fichier des évaluations.
    fp_svg: Path
        Fichier SVG produit.
    smooth: int, defaults to 5
        Fenêtre de la moyenne glissante (1: pas de lissage).

    Returns
    -------
    fp_svg: Path
        Chemin du SVG écrit.
    """
    if smooth < 1:
        raise ValueError(f"La fenêtre de lissage doit être >= 1: {smooth}")
    df = eval_frame_from_file(fp_metrics, smooth=smooth)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    panels = (("success_rate", "taux de succès"), ("mean_return", "retour moyen"))
    for ax, (col, label) in zip(axes, panels):
        ax.plot(df["env_ticks"], df[col], color="tab:blue", alpha=0.3, linewidth=1, marker="o", markersize=3)
        ax.plot(df["env_ticks"], df[f"{col}_smooth"], color="tab:blue", linewidth=2)
        ax.set_xlabel("ticks d'environnement")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(fp_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(fp_svg)
