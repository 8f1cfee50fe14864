"""
# Boucle d'entraînement.

Après le clonage comportemental de l'a priori (ou son chargement), alterne
collectes avec θ_old et phases de mise à jour jusqu'à épuisement du budget de
ticks d'environnement, avec une évaluation déterministe initiale, puis tous
les `eval_interval` ticks et en fin de budget.

Le même cycle sert aux trois algorithmes; seul le pas de l'acteur change:
fpo (ratio issu de la perte CFM), rwfm (régression pondérée), gppo (PPO
gaussien à rapport exact).
"""

import argparse
from dataclasses import replace
from datetime import datetime
import logging
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from src.agent.buffer import TrajectoryBuffer
from src.agent.flow_actor import FlowActor, cfm_loss, make_flow_actor
from src.agent.gaussian_actor import GaussianActor, make_gaussian_actor
from src.agent.value_ensemble import ValueEnsemble, make_value_ensemble
from src.envlab.base_decoder import BaseDecoder, make_decoder
from src.envlab.demos import demo_success_rate, generate_demos
from src.envlab.envs import make_env
from src.harness.config_io import config_hash, load_config
from src.harness.metrics_io import RunMetrics
from src.numkit.mlp import NonFiniteError
from src.numkit.rng import make_rng
from src.trainer.baselines import gppo_actor_step, rwfm_actor_step
from src.trainer.config import TrainerConfig
from src.trainer.errors import TrainingError
from src.trainer.pretrain_bc import pretrain_bc, pretrain_gaussian_bc
from src.trainer.rollout import EvalResult, env_kwargs, evaluate, make_env_pool, rollout_phase
from src.trainer.update import Learner, fpo_actor_step, make_learner, update_phase

ACTOR_STEPS = {
    "fpo": fpo_actor_step,
    "rwfm": rwfm_actor_step,
    "gppo": gppo_actor_step,
}


class Prior(NamedTuple):
    actor: object
    decoder: BaseDecoder
    bc_losses: list
    demo_success: float
    critics: Optional[ValueEnsemble] = None  # reprise depuis un point de sauvegarde


class TrainResult(NamedTuple):
    metrics: RunMetrics
    learner: Learner
    buffer: TrajectoryBuffer
    latents: Dict[str, EvalResult]  # "prior", "mid" (éventuel), "final"
    env_ticks: int
    snapshots: Dict[int, np.ndarray]  # paramètres θ_old par collecte retenue


def build_prior(
    cfg: TrainerConfig,
    seed: Optional[int] = None,
    demos: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Prior:
    """Démonstrations scriptées puis clonage comportemental ; le décodeur est gelé.

    L'acteur est gaussien pour gppo, à flot sinon. `demos` (états, blocs)
    remplace la génération des démonstrations.
    """
    seed = cfg.seed if seed is None else seed
    env = make_env(cfg.env, **env_kwargs(cfg))
    demo_success = float("nan")
    if demos is None:
        episodes = generate_demos(
            env,
            cfg.demo_quality,
            cfg.demo_episodes,
            make_rng(seed, "demos"),
            cfg.suboptimal_bias_deg,
            cfg.suboptimal_noise,
        )
        episodes = [ep for ep in episodes if not ep.empty]
        if not episodes:
            raise ValueError("Aucune démonstration non vide (horizon nul ?)")
        demos = (np.concatenate([ep.states for ep in episodes]), np.concatenate([ep.chunks for ep in episodes]))
        demo_success = demo_success_rate(episodes)
        logging.info(
            f"{len(episodes)} démonstrations '{cfg.demo_quality}', succès du démonstrateur {demo_success:.3f}"
        )
    states, chunks = demos
    if states.shape[1] != env.state_dim or chunks.shape[1] != env.latent_dim:
        raise ValueError(
            f"Démonstrations de dimensions {states.shape[1]}/{chunks.shape[1]}, "
            f"attendu {env.state_dim}/{env.latent_dim}"
        )
    logging.info(f"Clonage comportemental sur {states.shape[0]} paires")
    init_rng = make_rng(seed, "init")
    decoder = make_decoder(
        cfg.decoder_mode, env.state_dim, cfg.chunk_len, env.action_dim, cfg.decoder_hidden, init_rng, cfg.activation
    )
    bc_rng = make_rng(seed, "bc")
    if cfg.algo == "gppo":
        actor = make_gaussian_actor(
            env.state_dim, env.latent_dim, cfg.actor_hidden, init_rng, cfg.activation, cfg.gppo_init_log_std
        )
        bc = pretrain_gaussian_bc(
            actor, states, chunks, cfg.bc_epochs, bc_rng, cfg.bc_lr, cfg.bc_batch_size, decoder, cfg.grad_clip
        )
    else:
        actor = make_flow_actor(env.state_dim, env.latent_dim, cfg.actor_hidden, init_rng, cfg.activation)
        bc = pretrain_bc(
            actor, states, chunks, cfg.bc_epochs, bc_rng, cfg.bc_lr, cfg.bc_batch_size, cfg.m_draws, decoder, cfg.grad_clip
        )
    decoder.freeze()
    return Prior(bc.actor, decoder, bc.losses, demo_success)


def configure_actor(actor, cfg: TrainerConfig):
    """Copie de l'acteur avec les paramètres d'échantillonnage et d'exploration de `cfg`."""
    if isinstance(actor, FlowActor):
        return replace(
            actor.copy(),
            n_sample_steps=cfg.n_sample_steps,
            explore_steps=cfg.effective_explore_steps,
            eta=cfg.eta,
            sigma_explore=cfg.sigma_explore,
            explore_tau=cfg.explore_tau,
        )
    return actor.copy()


def resume_critics(critics: ValueEnsemble, cfg: TrainerConfig) -> ValueEnsemble:
    """Copie des critiques repris, avec γ, λ et τ de `cfg`."""
    if critics.n_members != cfg.effective_n_critics:
        raise ValueError(
            f"{critics.n_members} critiques dans l'a priori, {cfg.effective_n_critics} attendus par la configuration"
        )
    logging.info(f"Reprise de {critics.n_members} critiques et de leurs cibles")
    return ValueEnsemble(
        [c.copy() for c in critics.critics],
        [t.copy() for t in critics.targets],
        gamma=cfg.gamma,
        lam=cfg.lam,
        tau_polyak=cfg.tau_polyak,
    )


def _crash_dump(out_dir: Optional[Path], learner: Learner) -> Optional[Path]:
    if out_dir is None or not Path(out_dir).is_dir():
        return None
    fp = Path(out_dir) / "crash_dump.npz"
    arrays = {"actor": learner.actor.params, "actor_old": learner.actor_old.params}
    for i, (c, t) in enumerate(zip(learner.critics.critics, learner.critics.targets)):
        arrays[f"critic_{i}"] = c.params
        arrays[f"target_{i}"] = t.params
    np.savez(fp, **arrays)
    return fp


def check_cache_integrity(buffer: TrajectoryBuffer, snapshots: Dict[int, np.ndarray], actor: FlowActor) -> bool:
    """Vrai si chaque ℓ_init retenu se recalcule au bit près sous le θ_old de sa collecte."""
    for traj in buffer.iter_ordered():
        old = actor.with_params(snapshots[traj[0].rollout_id])
        for tr in traj:
            if cfm_loss(old, tr.s, tr.x, tr.draws) != tr.l_init:
                return False
    return True


def train(
    cfg: TrainerConfig,
    out_dir: Optional[Path] = None,
    prior: Optional[Prior] = None,
    seed: Optional[int] = None,
) -> TrainResult:
    """Entraîne selon `cfg.algo` jusqu'à épuisement du budget de ticks.

    Parameters
    ----------
    cfg: TrainerConfig
        Configuration validée.
    out_dir: Path, optional
        Dossier de l'exécution (archive des paramètres en cas d'échec numérique).
    prior: Prior, optional
        A priori déjà entraîné ; construit par `build_prior` sinon.
    seed: int, optional
        Graine (cfg.seed par défaut).

    Returns
    -------
    result: TrainResult
        Métriques, état final, tampon, latents d'évaluation.
    """
    seed = cfg.seed if seed is None else seed
    algo = cfg.algo
    chash = config_hash(cfg)
    logging.info(f"Entraînement {algo} (graine {seed}, configuration {chash})")
    if prior is None:
        prior = build_prior(cfg, seed)
    if (algo == "gppo") != isinstance(prior.actor, GaussianActor):
        raise ValueError(f"A priori de type {type(prior.actor).__name__} incompatible avec l'algorithme {algo}")
    actor = configure_actor(prior.actor, cfg)
    decoder = prior.decoder
    if prior.critics is not None:
        critics = resume_critics(prior.critics, cfg)
    else:
        critics = make_value_ensemble(
            actor.state_dim,
            actor.latent_dim,
            cfg.critic_hidden,
            cfg.effective_n_critics,
            make_rng(seed, "init", 1),
            cfg.activation,
            gamma=cfg.gamma,
            lam=cfg.lam,
            tau_polyak=cfg.tau_polyak,
        )
    learner = make_learner(actor, critics, decoder, cfg.actor_lr, cfg.critic_lr)
    buffer = TrajectoryBuffer(cfg.window, require_draws=algo != "gppo")
    metrics = RunMetrics(config_hash=chash)
    pool = make_env_pool(cfg, seed)
    rollout_rng = make_rng(seed, "rollout")
    update_rng = make_rng(seed, "update")
    actor_step = ACTOR_STEPS[algo]
    snapshots = {}
    ticks = 0
    phase = 0

    def run_eval() -> EvalResult:
        try:
            return evaluate(learner.actor, decoder, cfg, seed, cfg.eval_episodes)
        except NonFiniteError as err:
            dump = _crash_dump(out_dir, learner)
            raise TrainingError(f"Évaluation non finie: {err}", algo, seed, phase, ticks, dump) from err

    ev = run_eval()
    metrics.add_eval(0, ev.success_rate, ev.mean_return, ev.mean_length)
    latents = {"prior": ev}
    logging.info(f"A priori: succès {ev.success_rate:.3f}, longueur moyenne {ev.mean_length:.1f}")
    next_eval = cfg.eval_interval
    mid, mid_gap = None, None
    while ticks < cfg.budget:
        phase += 1
        try:
            transitions, rstats = rollout_phase(
                learner.actor_old, decoder, pool, cfg.t_rollout, rollout_rng, phase, cfg.m_draws
            )
            if not transitions:
                logging.warning("Collecte vide (t_rollout = 0): arrêt de l'entraînement")
                break
            buffer.push_rollout(transitions)
            snapshots[phase] = learner.actor_old.params.copy()
            snapshots = {rid: snapshots[rid] for rid in buffer.rollout_ids}
            ticks += rstats.n_ticks
            ustats = update_phase(learner, buffer, cfg, update_rng, actor_step)
        except NonFiniteError as err:
            dump = _crash_dump(out_dir, learner)
            raise TrainingError(f"Calcul non fini: {err}", algo, seed, phase, ticks, dump) from err
        if not decoder.verify():
            raise TrainingError("Les paramètres du décodeur gelé ont changé", algo, seed, phase, ticks)
        metrics.add_update(phase, ticks, ustats)
        logging.info(
            f"Phase {phase}: {ticks} ticks, ρ moyen {ustats.mean_rho:.4f}, troncature "
            f"{ustats.clip_fraction:.3f}, perte acteur {ustats.actor_loss:.4g}, "
            f"perte critique {ustats.critic_loss:.4g}"
        )
        if ticks >= next_eval or ticks >= cfg.budget:
            ev = run_eval()
            metrics.add_eval(ticks, ev.success_rate, ev.mean_return, ev.mean_length)
            logging.info(f"Évaluation à {ticks} ticks: succès {ev.success_rate:.3f}, retour {ev.mean_return:.3f}")
            while next_eval <= ticks:
                next_eval += cfg.eval_interval
            latents["final"] = ev
            gap = abs(ticks - cfg.budget / 2)
            if mid_gap is None or gap < mid_gap:
                mid, mid_gap = ev, gap
    if mid is not None and mid is not latents.get("final"):
        latents["mid"] = mid
    return TrainResult(metrics, learner, buffer, latents, ticks, snapshots)


def train_baseline_rwfm(cfg: TrainerConfig, **kwargs) -> TrainResult:
    """Régression CFM pondérée par la récompense, même machinerie que FPO."""
    return train(cfg.replace(algo="rwfm"), **kwargs)


def train_baseline_gaussian_ppo(cfg: TrainerConfig, **kwargs) -> TrainResult:
    """PPO sur une politique latente gaussienne (rapport exact)."""
    return train(cfg.replace(algo="gppo"), **kwargs)


if __name__ == "__main__":
    # log
    dir_log = Path(__file__).resolve().parents[2] / "logs"
    dir_log.mkdir(exist_ok=True)
    logging.basicConfig(
        filename=f"{dir_log}/train_{datetime.now().isoformat()}.log",
        encoding="utf-8",
        level=logging.DEBUG,
    )
    logging.captureWarnings(True)

    parser = argparse.ArgumentParser()
    parser.add_argument("--config", type=Path, help="Fichier de configuration YAML")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()

    cfg = load_config(args.config) if args.config else TrainerConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    res = train(cfg)
    for row in res.metrics.evals:
        print(row)
