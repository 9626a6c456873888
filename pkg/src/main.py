import argparse
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

from src.config import Settings, build_settings
from src.exceptions import (
    AttentionUnavailableError,
    ConfigurationError,
    CorpusException,
    EvaluationException,
    ModelException,
    PretrainException,
    TrainingException,
)
from src.schemas.introspection.models import StatsReport
from src.services.ablation.runner import run_ablation
from src.services.corpus.bundle import bundle_digest, load_bundle, save_bundle
from src.services.corpus.factory import make_dataset_bundle
from src.services.corpus.synthetic import generate_synthetic_dataset, write_interactions
from src.services.evaluation.evaluator import evaluate
from src.services.introspection.attention import attention_dump, format_user_attention, write_dump, write_heatmap_csv
from src.services.introspection.statistics import dataset_statistics, shared_aspect_distribution
from src.services.manifest import manifest_path_for, write_manifest
from src.services.model.checkpoint import load_checkpoint, save_checkpoint
from src.services.model.factory import make_model_params
from src.services.pretrain.factory import pretrain_aspect_embeddings
from src.services.pretrain.vectors import load_embeddings, save_embeddings
from src.services.training.factory import make_trainer
from src.services.training.trainer import BEST_CHECKPOINT
from src.services.variants.registry import VARIANT_ORDER, get_variant, parse_variant_list
from src.services.variants.strategies import requires_embeddings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)

# Sections whose seed follows the global --seed flag
SEEDED_SECTIONS = ("corpus", "pretrain", "train", "introspection")
THREADED_SECTIONS = ("pretrain", "evaluation")

CommandResult = tuple[Path, list[Path]]


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="Config file of section.key=value lines")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="Intra-command parallelism")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Seed for every random stream")
    common.add_argument(
        "--log-level",
        dest="log_level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        type=str.upper,
        default=argparse.SUPPRESS,
    )
    return common


def _override(parser: argparse.ArgumentParser, flag: str, key: str, **kwargs: Any) -> None:
    """Flag stored under a dotted settings key; absent flags leave the settings untouched."""
    parser.add_argument(flag, dest=key, default=argparse.SUPPRESS, **kwargs)


def _training_flags(parser: argparse.ArgumentParser) -> None:
    _override(parser, "--strategy", "model.strategy", choices=("pretrain_transform", "pretrain_tune", "random_tune"))
    _override(parser, "--lr", "train.learning_rate", type=float)
    _override(parser, "--l2", "train.l2", type=float)
    _override(parser, "--batch", "train.batch_size", type=int)
    _override(parser, "--epochs", "train.max_epochs", type=int)
    _override(parser, "--eval-every", "train.eval_every", type=int)
    _override(parser, "--d-a", "model.d_a", type=int)
    _override(parser, "--d-g", "model.d_g", type=int)
    _override(parser, "--dropout", "model.dropout", type=float)
    _override(parser, "--masking-mode", "model.masking_mode", choices=("softmax_exclude", "literal"))
    _override(parser, "--dtype", "model.dtype", choices=("float64", "float32"))


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="aarm",
        description="Aspect-based attentive recommendation: prepare, pretrain, train, evaluate, ablate, inspect",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", metavar="<command>", required=True)

    synthesize = commands.add_parser("synthesize", parents=[common], help="Generate a synthetic review corpus")
    synthesize.add_argument("--out", required=True, help="JSON-lines file to write")
    synthesize.add_argument("--users", type=int, default=200)
    synthesize.add_argument("--items", type=int, default=200)
    synthesize.add_argument("--aspects", type=int, default=30)
    synthesize.add_argument("--aspects-per-user", type=int, default=6)
    synthesize.add_argument("--aspects-per-item", type=int, default=6)
    synthesize.add_argument("--interactions-per-user", type=int, default=10)

    prepare = commands.add_parser("prepare", parents=[common], help="Build a dataset bundle from interactions")
    prepare.add_argument("--input", required=True, help="JSON-lines interaction file")
    prepare.add_argument("--out", help="Bundle directory (default paths.data_dir)")
    _override(prepare, "--ratio", "corpus.ratio", type=float)
    _override(prepare, "--quantile", "corpus.quantile", type=float)
    _override(prepare, "--aspects-from", "corpus.aspects_from", choices=("train", "all"))
    _override(prepare, "--validation-users", "corpus.validation_users", type=int)

    pretrain = commands.add_parser("pretrain", parents=[common], help="Train or import aspect embeddings")
    pretrain.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    pretrain.add_argument("--out", help="Vector file (default paths.embeddings)")
    pretrain.add_argument("--import", dest="import_path", help="Validate and copy external vectors instead of training")
    _override(pretrain, "--dim", "pretrain.dim", type=int)
    _override(pretrain, "--window", "pretrain.window", type=int)
    _override(pretrain, "--negatives", "pretrain.negatives", type=int)
    _override(pretrain, "--epochs", "pretrain.epochs", type=int)

    train = commands.add_parser("train", parents=[common], help="Train one model variant")
    train.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    train.add_argument("--embeddings", help="Pre-trained vectors (default paths.embeddings)")
    train.add_argument("--out", help="Checkpoint directory (default paths.checkpoints)")
    train.add_argument("--resume", action="store_true", help="Continue from last.ckpt in the output directory")
    _override(train, "--variant", "model.variant", choices=VARIANT_ORDER)
    _training_flags(train)

    evaluate_cmd = commands.add_parser("evaluate", parents=[common], help="Top-N evaluation on the test split")
    evaluate_cmd.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    evaluate_cmd.add_argument("--ckpt", help="Checkpoint file (default <paths.checkpoints>/best.ckpt)")
    evaluate_cmd.add_argument("--out", help="Report file (default <paths.reports>/report.json)")
    _override(evaluate_cmd, "--n", "evaluation.top_n", type=int)

    ablate = commands.add_parser("ablate", parents=[common], help="Train and compare model variants")
    ablate.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    ablate.add_argument("--variants", help="Comma-separated variant tags (default: all)")
    ablate.add_argument("--embeddings", help="Pre-trained vectors (default paths.embeddings)")
    ablate.add_argument("--out", help="Report directory (default <paths.reports>/ablation)")
    _training_flags(ablate)
    _override(ablate, "--n", "evaluation.top_n", type=int)

    inspect = commands.add_parser("inspect", parents=[common], help="Dump attention weights of one pair")
    inspect.add_argument("--ckpt", help="Checkpoint file (default <paths.checkpoints>/best.ckpt)")
    inspect.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    inspect.add_argument("--user", required=True, help="Raw user id")
    inspect.add_argument("--item", required=True, help="Raw product id")
    inspect.add_argument("--out", help="Dump file (default <paths.reports>/attention.json)")
    inspect.add_argument("--csv", help="Heatmap CSV (default: dump path with .csv suffix)")

    stats = commands.add_parser("stats", parents=[common], help="Dataset and shared-aspect statistics")
    stats.add_argument("--data", help="Bundle directory (default paths.data_dir)")
    stats.add_argument("--out", help="Statistics file (default <paths.reports>/stats.json)")
    stats.add_argument("--shared-aspects", action="store_true", help="Include the shared-aspect histogram")
    _override(stats, "--truncated", "introspection.truncated", action="store_true")
    _override(stats, "--sample-pairs", "introspection.sample_pairs", type=int)
    mode = stats.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_const", const=True, default=None)
    mode.add_argument("--sampled", dest="exact", action="store_const", const=False)

    return parser


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested settings overrides from the flags that were actually given."""
    values = vars(args)
    overrides: dict[str, Any] = {}
    for key, value in values.items():
        if "." in key:
            section, field = key.split(".", 1)
            overrides.setdefault(section, {})[field] = value

    if "seed" in values:
        overrides["seed"] = values["seed"]
        for section in SEEDED_SECTIONS:
            overrides.setdefault(section, {}).setdefault("seed", values["seed"])
    if "threads" in values:
        overrides["threads"] = values["threads"]
        for section in THREADED_SECTIONS:
            overrides.setdefault(section, {}).setdefault("threads", values["threads"])
    if "log_level" in values:
        overrides["log_level"] = values["log_level"]
    return overrides


def _data_dir(args: argparse.Namespace, settings: Settings) -> Path:
    return Path(args.data or settings.paths.data_dir)


def _checkpoint_path(args: argparse.Namespace, settings: Settings) -> Path:
    return Path(args.ckpt) if args.ckpt else Path(settings.paths.checkpoints) / BEST_CHECKPOINT


def _report_path(value: str | None, settings: Settings, default_name: str) -> Path:
    return Path(value) if value else Path(settings.paths.reports) / default_name


def _files_under(directory: Path) -> list[Path]:
    return sorted(path for path in directory.rglob("*") if path.is_file())


def _load_pretrained(args: argparse.Namespace, settings: Settings, variants: list[str], vocab):
    strategy = settings.model.strategy
    if not any(requires_embeddings(strategy, variant) for variant in variants):
        return None
    path = args.embeddings or settings.paths.embeddings
    return load_embeddings(path, expected_dim=settings.model.d_a, vocab=vocab)


def cmd_synthesize(args: argparse.Namespace, settings: Settings) -> CommandResult:
    records = generate_synthetic_dataset(
        n_users=args.users,
        n_items=args.items,
        n_aspects=args.aspects,
        aspects_per_user=args.aspects_per_user,
        aspects_per_item=args.aspects_per_item,
        interactions_per_user=args.interactions_per_user,
        seed=settings.seed,
    )
    output = write_interactions(records, args.out)
    return manifest_path_for(output), [output]


def cmd_prepare(args: argparse.Namespace, settings: Settings) -> CommandResult:
    out_dir = Path(args.out or settings.paths.data_dir)
    bundle = make_dataset_bundle(args.input, settings)
    save_bundle(bundle, out_dir)
    stats = bundle.statistics()
    logger.info(
        f"Prepared {stats.n_users} users, {stats.n_items} items, {stats.n_aspects} aspects "
        f"(M_u={stats.m_u}, M_v={stats.m_v}); bundle digest {bundle_digest(out_dir)}"
    )
    return manifest_path_for(out_dir), _files_under(out_dir)


def cmd_pretrain(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    if args.import_path:
        table = load_embeddings(args.import_path, expected_dim=settings.model.d_a, vocab=bundle.vocab)
    else:
        table = pretrain_aspect_embeddings(bundle, settings)
    output = save_embeddings(table, args.out or settings.paths.embeddings)
    logger.info(f"Wrote {len(table.tokens)} vectors (dim={table.dim}) to {output}")
    return manifest_path_for(output), [output]


def cmd_train(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    embeddings = _load_pretrained(args, settings, [settings.model.variant], bundle.vocab)
    params = make_model_params(bundle, settings, embeddings)

    out_dir = Path(args.out or settings.paths.checkpoints)
    trainer = make_trainer(bundle, params, settings, out_dir)
    best, history = trainer.train(resume=args.resume)

    best_path = out_dir / BEST_CHECKPOINT
    if not best_path.exists():
        save_checkpoint(best_path, best, meta={"epoch": history.best_epoch})
    logger.info(
        f"Training finished at epoch {history.stopped_epoch} (best epoch {history.best_epoch}"
        f"{', early stop' if history.early_stopped else ''}); best checkpoint at {best_path}"
    )
    return manifest_path_for(out_dir), _files_under(out_dir)


def cmd_evaluate(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    params = load_checkpoint(
        _checkpoint_path(args, settings), aspect_sets=bundle.aspect_sets, n_aspect_rows=bundle.vocab.size
    )
    report = evaluate(params, bundle, n=settings.evaluation.top_n, threads=settings.evaluation.threads)

    output = _report_path(args.out, settings, "report.json")
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(
        f"{params.config.variant} over {report.n_users} users: "
        + ", ".join(f"{name}@{report.n}={value:.3f}%" for name, value in report.percent.items())
    )
    return manifest_path_for(output), [output]


def cmd_ablate(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    variants = parse_variant_list(args.variants) if args.variants else list(VARIANT_ORDER)
    embeddings = _load_pretrained(args, settings, variants, bundle.vocab)

    out_dir = Path(args.out) if args.out else Path(settings.paths.reports) / "ablation"
    run_ablation(bundle, variants, strategy=settings.model.strategy, embeddings=embeddings, settings=settings, out_dir=out_dir)
    return manifest_path_for(out_dir), _files_under(out_dir)


def cmd_inspect(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    params = load_checkpoint(
        _checkpoint_path(args, settings), aspect_sets=bundle.aspect_sets, n_aspect_rows=bundle.vocab.size
    )
    spec = get_variant(params.config.variant)
    include_alpha = spec.use_aspect and spec.user_pool == "attention"
    include_beta = spec.use_aspect and spec.aspect_pool == "attention"
    if not include_alpha and not include_beta:
        raise AttentionUnavailableError(f"Variant '{spec.name}' has no attention weights to inspect")

    dump = attention_dump(params, bundle, args.user, args.item, include_alpha=include_alpha, include_beta=include_beta)
    output = write_dump(dump, _report_path(args.out, settings, "attention.json"))
    outputs = [output]
    if dump.beta is not None:
        outputs.append(write_heatmap_csv(dump, args.csv or output.with_suffix(".csv")))
    if dump.user_attention:
        logger.info("User-level attention:\n" + format_user_attention(dump))
    return manifest_path_for(output), outputs


def cmd_stats(args: argparse.Namespace, settings: Settings) -> CommandResult:
    bundle = load_bundle(_data_dir(args, settings))
    introspection = settings.introspection
    histogram = None
    if args.shared_aspects:
        histogram = shared_aspect_distribution(
            bundle,
            truncated=introspection.truncated,
            sample_pairs=introspection.sample_pairs,
            exact_limit=introspection.exact_limit,
            exact=args.exact,
            seed=introspection.seed,
        )
    report = StatsReport(dataset=dataset_statistics(bundle), shared_aspects=histogram)

    output = _report_path(args.out, settings, "stats.json")
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return manifest_path_for(output), [output]


COMMANDS: dict[str, Callable[[argparse.Namespace, Settings], CommandResult]] = {
    "synthesize": cmd_synthesize,
    "prepare": cmd_prepare,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "inspect": cmd_inspect,
    "stats": cmd_stats,
}

DOMAIN_ERRORS = (
    CorpusException,
    PretrainException,
    ModelException,
    TrainingException,
    EvaluationException,
    FileNotFoundError,
)


def run_command(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and write its manifest.

    :param argv: Arguments without the program name; ``sys.argv[1:]`` when None
    :returns: 0 on success, 1 on a domain error, 2 on a usage or configuration error
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    configure_logging(getattr(args, "log_level", "INFO"))
    try:
        settings = build_settings(getattr(args, "config", None), collect_overrides(args))
        configure_logging(settings.log_level)
        manifest_path, outputs = COMMANDS[args.command](args, settings)
        write_manifest(manifest_path, args.command, settings, outputs, argv=argv)
    except ConfigurationError as e:
        logger.error(f"{args.command}: {e}")
        return 2
    except DOMAIN_ERRORS as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
