"""
# Vérification des gradients par différences finies centrées.
"""

import logging
from typing import Callable, Tuple

import numpy as np


def grad_check(
    loss_fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    params: np.ndarray,
    fd_step: float = 1e-5,
) -> float:
    """Compare le gradient analytique aux différences finies centrées.

    Parameters
    ----------
    loss_fn: callable
        Fonction params -> (perte scalaire, gradient analytique), déterministe
        (tirages aléatoires figés).
    params: np.ndarray
        Point d'évaluation (non modifié).
    fd_step: float, defaults to 1e-5
        Pas des différences finies.

    Returns
    -------
    max_rel_err: float
        max sur les paramètres de |analytique - différence| / max(1, |analytique|, |différence|) ;
        `inf` si une perte évaluée n'est pas finie.
    """
    params = np.asarray(params, dtype=np.float64)
    loss0, grad = loss_fn(params.copy())
    if not np.isfinite(loss0):
        logging.error(f"grad_check: perte non finie au point d'évaluation ({loss0})")
        return float("inf")
    grad = np.asarray(grad, dtype=np.float64)
    max_err = 0.0
    for i in range(params.size):
        p_plus = params.copy()
        p_plus[i] += fd_step
        p_minus = params.copy()
        p_minus[i] -= fd_step
        l_plus, _ = loss_fn(p_plus)
        l_minus, _ = loss_fn(p_minus)
        if not (np.isfinite(l_plus) and np.isfinite(l_minus)):
            logging.error(f"grad_check: perte non finie autour du paramètre {i}")
            return float("inf")
        fd = (l_plus - l_minus) / (2.0 * fd_step)
        err = abs(grad[i] - fd) / max(1.0, abs(grad[i]), abs(fd))
        max_err = max(max_err, err)
    return float(max_err)
