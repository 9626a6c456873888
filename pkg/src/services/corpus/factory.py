import logging
from pathlib import Path

from src.config import Settings, get_settings

from .aspects import build_aspect_sets, build_vocabulary
from .bundle import DatasetBundle
from .loader import load_interactions
from .splitter import split_train_test
from .validation import build_validation

logger = logging.getLogger(__name__)


def make_dataset_bundle(input_path: str | Path, settings: Settings | None = None) -> DatasetBundle:
    """Run the full preparation pipeline: load, split, aspect sets, validation set.

    :param input_path: JSON-lines interaction file
    :param settings: Optional settings instance
    :returns: Prepared dataset bundle
    """
    if settings is None:
        settings = get_settings()
    corpus = settings.corpus

    table = load_interactions(input_path)
    table = split_train_test(table, ratio=corpus.ratio, seed=corpus.seed)
    vocab = build_vocabulary(table, aspects_from=corpus.aspects_from)
    aspect_sets = build_aspect_sets(table, vocab, quantile=corpus.quantile, aspects_from=corpus.aspects_from)
    validation = build_validation(table, n_users=corpus.validation_users, seed=corpus.seed)

    return DatasetBundle(table=table, vocab=vocab, aspect_sets=aspect_sets, validation=validation)
