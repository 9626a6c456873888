import logging

import numpy as np
from src.config import StrategyName
from src.exceptions import ConfigurationError, EmbeddingDimensionMismatch
from src.schemas.corpus.models import PAD_INDEX
from src.schemas.model.models import ModelParams

from .registry import get_variant

logger = logging.getLogger(__name__)

STRATEGIES: tuple[StrategyName, ...] = ("pretrain_transform", "pretrain_tune", "random_tune")
PRETRAINED_STRATEGIES = frozenset({"pretrain_transform", "pretrain_tune"})


def requires_embeddings(strategy: str, variant: str = "aarm") -> bool:
    return strategy in PRETRAINED_STRATEGIES and get_variant(variant).use_aspect


def apply_embedding_strategy(
    params: ModelParams,
    strategy: StrategyName,
    pretrained: np.ndarray | None = None,
) -> ModelParams:
    """Set W_A, W_trans and their trainability for an embedding strategy.

    pretrain_transform: W_A = pretrained and fixed, W_trans trainable.
    pretrain_tune: W_A = pretrained and trainable, W_trans fixed at identity.
    random_tune: W_A keeps its random init and is trainable, W_trans fixed at identity.

    :param params: Freshly initialized parameters
    :param strategy: Strategy tag
    :param pretrained: (|A|+1, d_a) aspect matrix, row 0 zero
    :returns: New parameters; the input is left untouched
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"Unknown embedding strategy '{strategy}'; expected one of {', '.join(STRATEGIES)}")

    spec = get_variant(params.config.variant)
    updated = params.copy()
    matrices = updated.matrices
    dtype = updated.dtype

    if strategy in PRETRAINED_STRATEGIES:
        if pretrained is None:
            if spec.use_aspect:
                raise ConfigurationError(f"Strategy '{strategy}' requires pre-trained aspect embeddings")
        else:
            if pretrained.shape != matrices["W_A"].shape:
                raise EmbeddingDimensionMismatch(
                    f"Pre-trained aspect matrix has shape {pretrained.shape}, expected {matrices['W_A'].shape}"
                )
            matrices["W_A"] = np.array(pretrained, dtype=dtype)
            matrices["W_A"][PAD_INDEX] = 0.0

    if strategy != "pretrain_transform":
        matrices["W_trans"] = np.eye(matrices["W_trans"].shape[0], dtype=dtype)

    updated.trainable["W_A"] = strategy != "pretrain_transform" and "W_A" not in spec.unused
    updated.trainable["W_trans"] = strategy == "pretrain_transform" and "W_trans" not in spec.unused
    updated.config = updated.config.model_copy(update={"strategy": strategy})

    logger.debug(f"Embedding strategy {strategy}: trainable = {', '.join(updated.trainable_names())}")
    return updated
