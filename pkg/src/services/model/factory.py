from src.config import Settings, get_settings
from src.exceptions import EmbeddingDimensionMismatch
from src.schemas.model.models import ModelParams
from src.schemas.pretrain.models import EmbeddingTable
from src.services.corpus.bundle import DatasetBundle
from src.services.pretrain.vectors import aspect_matrix
from src.services.variants.strategies import apply_embedding_strategy

from .engine import AARMEngine
from .params import init_params


def make_model_params(
    bundle: DatasetBundle,
    settings: Settings | None = None,
    embeddings: EmbeddingTable | None = None,
) -> ModelParams:
    """Factory function to initialize parameters for a dataset and apply the embedding strategy.

    :param bundle: Prepared dataset
    :param settings: Optional settings instance
    :param embeddings: Pre-trained aspect vectors, required by the pretrain strategies
    :returns: ModelParams ready for training
    """
    if settings is None:
        settings = get_settings()
    config = settings.model

    pretrained = None
    if embeddings is not None:
        if embeddings.dim != config.d_a:
            raise EmbeddingDimensionMismatch(f"dimension mismatch: embeddings have {embeddings.dim}, config d_a is {config.d_a}")
        pretrained = aspect_matrix(embeddings, bundle.vocab)

    params = init_params(config, bundle.n_users, bundle.n_items, bundle.vocab.size, seed=settings.train.seed)
    return apply_embedding_strategy(params, config.strategy, pretrained)


def make_engine(params: ModelParams, bundle: DatasetBundle) -> AARMEngine:
    """Engine over the bundle's padded aspect sets, running the variant stored in ``params``."""
    return AARMEngine(params, bundle.aspect_sets)
