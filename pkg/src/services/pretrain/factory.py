from src.config import Settings, get_settings
from src.schemas.pretrain.models import EmbeddingTable, aspect_token
from src.services.corpus.bundle import DatasetBundle

from .sgns import SkipGramTrainer
from .tokenizer import tokenize_reviews


def make_skipgram_trainer(settings: Settings | None = None) -> SkipGramTrainer:
    """Factory function to create a skip-gram trainer from pretrain settings.

    :param settings: Optional settings instance
    :returns: SkipGramTrainer instance
    """
    if settings is None:
        settings = get_settings()
    pretrain = settings.pretrain

    return SkipGramTrainer(
        dim=pretrain.dim,
        window=pretrain.window,
        negatives=pretrain.negatives,
        epochs=pretrain.epochs,
        alpha=pretrain.alpha,
        min_alpha=pretrain.min_alpha,
        min_count=pretrain.min_count,
        aspect_min_count=pretrain.aspect_min_count,
        batch_pairs=pretrain.batch_pairs,
        seed=pretrain.seed,
        threads=pretrain.threads,
    )


def pretrain_aspect_embeddings(bundle: DatasetBundle, settings: Settings | None = None) -> EmbeddingTable:
    """Tokenize the bundle's train reviews and train skip-gram vectors covering every aspect."""
    if settings is None:
        settings = get_settings()
    corpus = tokenize_reviews(bundle.table, bundle.vocab, aspects_from=settings.corpus.aspects_from)
    aspect_tokens = {aspect_token(aspect) for aspect in bundle.vocab.aspects[1:]}
    return make_skipgram_trainer(settings).train(corpus, aspect_tokens=aspect_tokens)
