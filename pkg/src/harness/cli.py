"""
# Interface en ligne de commande.

Sous-commandes: `gen-demos`, `pretrain`, `train`, `eval`, `ablate`,
`dump-latents`, `plot`. Tous les fichiers d'une exécution sont écrits dans le
dossier `--out` (par défaut `runs/<algo>_<env>_seed<graine>`), selon
`RUN_LAYOUT`.

Codes de sortie: 0 succès, 2 usage, 3 configuration, 4 point de sauvegarde,
5 entrée/sortie, 6 échec de l'entraînement ou calcul non fini.
"""

import argparse
import logging
from pathlib import Path
import sys
from typing import List, Optional

from src import __version__
from src.envlab.demos import calibrate_suboptimal, generate_demos, read_demos, write_demos
from src.envlab.envs import make_env
from src.harness.checkpoint import (
    Checkpoint,
    CheckpointError,
    build_checkpoint,
    load_checkpoint,
    restore_actor,
    restore_critics,
    restore_decoder,
    save_checkpoint,
)
from src.harness.config_io import config_hash, load_config, save_config
from src.harness.latents import latent_records, read_latents, summarize_latents, write_latents
from src.harness.manifest import RUN_LAYOUT, RunManifest, write_manifest
from src.harness.metrics_io import MetricsFormatError, write_metrics
from src.harness.plot import plot_metrics
from src.numkit.mlp import NonFiniteError
from src.numkit.rng import make_rng
from src.trainer.ablation import run_ablation_suite, write_ablation_table
from src.trainer.config import ConfigError, TrainerConfig
from src.trainer.errors import TrainingError
from src.trainer.fpo import Prior, build_prior, train
from src.trainer.rollout import env_kwargs, evaluate
from src.utils.log_utils import setup_logging


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CHECKPOINT = 4
EXIT_IO = 5
EXIT_TRAINING = 6


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Fichier de configuration YAML")
    common.add_argument("--seed", type=int, help="Graine (remplace `seed` de la configuration)")
    common.add_argument("--out", type=Path, help="Dossier de l'exécution")
    common.add_argument("--algo", choices=["fpo", "rwfm", "gppo"])
    common.add_argument("--env", choices=["pointreach", "pushblock"])
    common.add_argument(
        "--redo",
        action="store_true",
        help="Ré-exécuter la commande, et écraser les fichiers de sortie",
    )

    parser = argparse.ArgumentParser(prog="fpo", description="Optimisation de politiques à flot latent")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", parents=[common], help="Démonstrations scriptées")
    p.add_argument("--episodes", type=int, help="Nombre d'épisodes (remplace `demo_episodes`)")
    p.add_argument(
        "--calibrate",
        action="store_true",
        help="Calibre le biais du démonstrateur sous-optimal avant la génération",
    )

    p = sub.add_parser("pretrain", parents=[common], help="A priori par clonage comportemental")
    p.add_argument("--demos", type=Path, help="Fichier de démonstrations (générées sinon)")

    p = sub.add_parser("train", parents=[common], help="Entraînement en ligne")
    p.add_argument("--checkpoint", type=Path, help="A priori à affiner (entraîné sinon)")

    p = sub.add_parser("eval", parents=[common], help="Évaluation déterministe d'un point de sauvegarde")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--episodes", type=int, help="Nombre d'épisodes (remplace `eval_episodes`)")

    sub.add_parser("ablate", parents=[common], help="Suite d'ablations sur les graines `seeds`")

    p = sub.add_parser("dump-latents", parents=[common], help="Latents d'évaluation d'un point de sauvegarde")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--episodes", type=int, help="Nombre d'épisodes (remplace `eval_episodes`)")
    p.add_argument("--phase", choices=["prior", "mid", "final"], default="final")
    p.add_argument("--append", action="store_true", help="Ajoute au fichier de latents existant")

    p = sub.add_parser("plot", parents=[common], help="Courbes d'apprentissage en SVG")
    p.add_argument("--metrics", type=Path, help="Fichier de métriques (`<out>/metrics.csv` par défaut)")
    p.add_argument("--smooth", type=int, default=5)
    return parser


def resolve_config(args: argparse.Namespace, base: Optional[TrainerConfig] = None) -> TrainerConfig:
    """Configuration du fichier (ou `base`, ou défauts), surchargée par les options."""
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = base if base is not None else TrainerConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "algo", "env") if getattr(args, k) is not None}
    return cfg.replace(**overrides) if overrides else cfg


def run_dir(args: argparse.Namespace, cfg: TrainerConfig) -> Path:
    out = args.out if args.out is not None else Path("runs") / f"{cfg.algo}_{cfg.env}_seed{cfg.seed}"
    out = Path(out).resolve()
    out.mkdir(parents=True, exist_ok=True)
    return out


def check_outputs(out_dir: Path, keys: List[str], redo: bool) -> None:
    for key in keys:
        fp = out_dir / RUN_LAYOUT[key]
        if fp.is_file() and not redo:
            raise FileExistsError(f"Le fichier de sortie {fp} existe déjà. Pour l'écraser, ajoutez --redo.")


def _write_run_header(out_dir: Path, command: str, cfg: TrainerConfig, seeds: List[int]) -> str:
    chash = config_hash(cfg)
    save_config(cfg, out_dir / RUN_LAYOUT["config"])
    write_manifest(RunManifest(command, chash, seeds), out_dir / RUN_LAYOUT["manifest"])
    return chash


def cmd_gen_demos(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.episodes is not None:
        cfg = cfg.replace(demo_episodes=args.episodes)
    out_dir = run_dir(args, cfg)
    setup_logging("gen-demos", out_dir)
    check_outputs(out_dir, ["demos", "config"], args.redo)
    env = make_env(cfg.env, **env_kwargs(cfg))
    if args.calibrate:
        bias, rate = calibrate_suboptimal(env, cfg.seed, n_episodes=cfg.demo_episodes, noise=cfg.suboptimal_noise)
        cfg = cfg.replace(suboptimal_bias_deg=bias)
        print(f"biais calibré: {bias:.4f}° (succès {rate:.3f})")
    episodes = generate_demos(
        env,
        cfg.demo_quality,
        cfg.demo_episodes,
        make_rng(cfg.seed, "demos"),
        cfg.suboptimal_bias_deg,
        cfg.suboptimal_noise,
    )
    _write_run_header(out_dir, "gen-demos", cfg, [cfg.seed])
    write_demos(episodes, out_dir / RUN_LAYOUT["demos"])
    n_success = sum(ep.success for ep in episodes)
    print(f"{len(episodes)} démonstrations ({n_success} réussies) -> {out_dir / RUN_LAYOUT['demos']}")
    return EXIT_OK


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out_dir = run_dir(args, cfg)
    setup_logging("pretrain", out_dir)
    check_outputs(out_dir, ["prior"], args.redo)
    demos = read_demos(args.demos) if args.demos is not None else None
    prior = build_prior(cfg, cfg.seed, demos=demos)
    chash = _write_run_header(out_dir, "pretrain", cfg, [cfg.seed])
    ckpt = build_checkpoint(cfg, chash, "prior", prior.actor, prior.decoder)
    save_checkpoint(ckpt, out_dir / RUN_LAYOUT["prior"])
    last = prior.bc_losses[-1] if prior.bc_losses else float("nan")
    print(f"a priori -> {out_dir / RUN_LAYOUT['prior']} (perte finale {last:.4g})")
    return EXIT_OK


def _load_prior(ckpt: Checkpoint, cfg: TrainerConfig) -> Prior:
    env = make_env(cfg.env, **env_kwargs(cfg))
    actor = restore_actor(ckpt, cfg)
    decoder = restore_decoder(ckpt, env.state_dim, cfg.chunk_len, env.action_dim)
    if actor.state_dim != env.state_dim or actor.latent_dim != decoder.latent_dim:
        raise CheckpointError(f"dimensions incompatibles avec l'environnement {cfg.env}")
    return Prior(actor, decoder, [], float("nan"), restore_critics(ckpt, cfg))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out_dir = run_dir(args, cfg)
    setup_logging("train", out_dir)
    check_outputs(out_dir, ["metrics", "checkpoint", "latents"], args.redo)
    prior = _load_prior(load_checkpoint(args.checkpoint), cfg) if args.checkpoint is not None else None
    chash = _write_run_header(out_dir, "train", cfg, [cfg.seed])
    res = train(cfg, out_dir=out_dir, prior=prior, seed=cfg.seed)
    write_metrics(res.metrics, out_dir / RUN_LAYOUT["metrics"])
    ckpt = build_checkpoint(cfg, chash, "trained", res.learner.actor, res.learner.decoder, res.learner.critics)
    save_checkpoint(ckpt, out_dir / RUN_LAYOUT["checkpoint"])
    run_id = out_dir.name
    records = [rec for phase, ev in res.latents.items() for rec in latent_records(run_id, phase, ev)]
    write_latents(records, out_dir / RUN_LAYOUT["latents"])
    summarize_latents(read_latents(out_dir / RUN_LAYOUT["latents"])).to_csv(
        out_dir / RUN_LAYOUT["latent_stats"], sep=";", index=False, float_format="%.17g", lineterminator="\n"
    )
    res.buffer.dump_records(out_dir / RUN_LAYOUT["buffer"])
    final = res.metrics.evals[-1]
    print(
        f"{cfg.algo} graine {cfg.seed}: {res.env_ticks} ticks, succès final {final['success_rate']:.3f}"
        f" -> {out_dir}"
    )
    return EXIT_OK


def _eval_checkpoint(args: argparse.Namespace):
    ckpt = load_checkpoint(args.checkpoint)
    cfg = resolve_config(args, base=ckpt.config)
    if args.episodes is not None:
        cfg = cfg.replace(eval_episodes=args.episodes)
    prior = _load_prior(ckpt, cfg)
    return cfg, evaluate(prior.actor, prior.decoder, cfg, cfg.seed, cfg.eval_episodes)


def cmd_eval(args: argparse.Namespace) -> int:
    setup_logging("eval", args.out)
    cfg, ev = _eval_checkpoint(args)
    logging.info(f"Évaluation de {args.checkpoint}: succès {ev.success_rate}")
    print(
        f"succès {ev.success_rate:.4f} sur {cfg.eval_episodes} épisodes, retour moyen {ev.mean_return:.4f},"
        f" longueur moyenne {ev.mean_length:.2f}"
    )
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if args.out is None:
        args.out = Path("runs") / f"ablate_{cfg.env}"
    out_dir = run_dir(args, cfg)
    setup_logging("ablate", out_dir)
    check_outputs(out_dir, ["ablation"], args.redo)
    seeds = list(cfg.seeds)
    _write_run_header(out_dir, "ablate", cfg, seeds)
    table = run_ablation_suite(cfg, seeds)
    write_ablation_table(table, out_dir / RUN_LAYOUT["ablation"])
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_dump_latents(args: argparse.Namespace) -> int:
    cfg, ev = _eval_checkpoint(args)
    out_dir = run_dir(args, cfg)
    setup_logging("dump-latents", out_dir)
    if not args.append:
        check_outputs(out_dir, ["latents"], args.redo)
    fp = out_dir / RUN_LAYOUT["latents"]
    write_latents(latent_records(out_dir.name, args.phase, ev), fp, append=args.append)
    summarize_latents(read_latents(fp)).to_csv(
        out_dir / RUN_LAYOUT["latent_stats"], sep=";", index=False, float_format="%.17g", lineterminator="\n"
    )
    print(f"latents ({args.phase}) -> {fp}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    if args.metrics is not None:
        fp_metrics = Path(args.metrics)
        out_dir = Path(args.out) if args.out is not None else fp_metrics.parent
    else:
        out_dir = run_dir(args, resolve_config(args))
        fp_metrics = out_dir / RUN_LAYOUT["metrics"]
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_logging("plot", out_dir)
    check_outputs(out_dir, ["curves"], args.redo)
    fp_svg = plot_metrics(fp_metrics, out_dir / RUN_LAYOUT["curves"], smooth=args.smooth)
    print(f"courbes -> {fp_svg}")
    return EXIT_OK


COMMANDS = {
    "gen-demos": cmd_gen_demos,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "dump-latents": cmd_dump_latents,
    "plot": cmd_plot,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée: exécute la sous-commande et renvoie le code de sortie."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        msg, code = f"configuration invalide: {err}", EXIT_CONFIG
    except CheckpointError as err:
        msg, code = f"point de sauvegarde invalide: {err}", EXIT_CHECKPOINT
    except (MetricsFormatError, OSError) as err:
        # FileNotFoundError, FileExistsError
        msg, code = f"entrée/sortie: {err}", EXIT_IO
    except (TrainingError, NonFiniteError) as err:
        msg, code = f"échec de l'entraînement: {err}", EXIT_TRAINING
    except ValueError as err:
        msg, code = f"paramètres invalides: {err}", EXIT_CONFIG
    logging.error(msg)
    print(f"erreur: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(cli_main())
