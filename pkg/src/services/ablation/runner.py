import logging
from pathlib import Path

from src.config import Settings, StrategyName, get_settings
from src.schemas.ablation import AblationReport, ImprovementRow, VariantResult
from src.schemas.evaluation.models import EvalReport
from src.schemas.pretrain.models import EmbeddingTable
from src.services.corpus.bundle import DatasetBundle
from src.services.evaluation.evaluator import evaluate
from src.services.model.factory import make_model_params
from src.services.training.trainer import Trainer
from src.services.variants.registry import get_variant

logger = logging.getLogger(__name__)

REFERENCE_VARIANT = "aarm"


def percent_improvement(reference: float, value: float) -> float | None:
    if value == 0.0:
        return None
    return round((reference - value) / value * 100.0, 3)


def compare(results: list[VariantResult], n: int) -> AblationReport:
    """Improvement of the reference (``aarm`` when present, else the first variant) over every other."""
    names = [result.variant for result in results]
    reference_name = REFERENCE_VARIANT if REFERENCE_VARIANT in names else names[0]
    reference = results[names.index(reference_name)].report.measures()

    rows = [
        ImprovementRow(
            variant=result.variant,
            improvements={
                name: percent_improvement(reference[name], value) for name, value in result.report.measures().items()
            },
        )
        for result in results
        if result.variant != reference_name
    ]
    return AblationReport(reference=reference_name, n=n, results=results, improvements=rows)


def run_variant(
    bundle: DatasetBundle,
    settings: Settings,
    variant: str,
    strategy: StrategyName,
    embeddings: EmbeddingTable | None,
    out_dir: Path | None,
) -> tuple[VariantResult, EvalReport]:
    get_variant(variant)
    variant_settings = settings.model_copy(
        update={"model": settings.model.model_copy(update={"variant": variant, "strategy": strategy})}
    )
    params = make_model_params(bundle, variant_settings, embeddings)
    trainer = Trainer(bundle, params, settings=variant_settings, out_dir=out_dir / variant if out_dir else None)
    best, history = trainer.train()
    report = evaluate(best, bundle, n=settings.evaluation.top_n, threads=settings.evaluation.threads)
    return VariantResult(variant=variant, strategy=strategy, best_epoch=history.best_epoch, report=report), report


def run_ablation(
    bundle: DatasetBundle,
    variants: list[str],
    strategy: StrategyName | None = None,
    embeddings: EmbeddingTable | None = None,
    settings: Settings | None = None,
    out_dir: str | Path | None = None,
) -> AblationReport:
    """Train and test every variant with identical data, seeds and hyperparameters.

    :param bundle: Prepared dataset
    :param variants: Variant tags, in report order
    :param strategy: Embedding strategy shared by all variants
    :param embeddings: Pre-trained vectors for the pretrain strategies
    :param settings: Optional settings instance
    :param out_dir: Writes report_<variant>.json, comparison.json and comparison.txt when given
    """
    if settings is None:
        settings = get_settings()
    strategy = strategy or settings.model.strategy
    output = Path(out_dir) if out_dir is not None else None

    results: list[VariantResult] = []
    for variant in variants:
        logger.info(f"Ablation: training variant {variant} ({strategy})")
        result, report = run_variant(bundle, settings, variant, strategy, embeddings, output)
        results.append(result)
        if output is not None:
            output.mkdir(parents=True, exist_ok=True)
            (output / f"report_{variant}.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    comparison = compare(results, settings.evaluation.top_n)
    if output is not None:
        (output / "comparison.json").write_text(
            comparison.model_dump_json(indent=2, exclude={"results": {"__all__": {"report": {"users"}}}}) + "\n",
            encoding="utf-8",
        )
        (output / "comparison.txt").write_text(comparison.table() + "\n", encoding="utf-8")
    logger.info("Ablation comparison:\n" + comparison.table())
    return comparison
