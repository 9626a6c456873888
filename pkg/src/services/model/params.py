import logging

import numpy as np
from src.config import ModelSettings
from src.schemas.corpus.models import PAD_INDEX
from src.schemas.model.models import MATRIX_NAMES, ModelParams
from src.services.variants.registry import get_variant

logger = logging.getLogger(__name__)


def init_params(
    config: ModelSettings,
    n_users: int,
    n_items: int,
    n_aspect_rows: int,
    seed: int = 2019,
) -> ModelParams:
    """Randomly initialize every matrix.

    W_trans = I + U(-noise, noise); W_A, w_att1, w_att2, W_U, W_V, W_out ~ U(-s, s) with
    W_A's PAD row zero. Every matrix the variant reads starts trainable; the embedding
    strategy later decides W_A and W_trans.

    :param config: Model configuration
    :param n_users: |U|
    :param n_items: |V|
    :param n_aspect_rows: |A| + 1
    :param seed: Initialization seed
    :returns: Fresh parameters
    """
    rng = np.random.default_rng(seed)
    spec = get_variant(config.variant)
    dtype = np.dtype(config.dtype)
    scale = config.init_scale
    d_a, d_g = config.d_a, config.d_g

    w_a = rng.uniform(-scale, scale, size=(n_aspect_rows, d_a))
    w_a[PAD_INDEX] = 0.0
    matrices = {
        "W_A": w_a,
        "W_trans": np.eye(d_a) + rng.uniform(-config.trans_noise, config.trans_noise, size=(d_a, d_a)),
        "w_att1": rng.uniform(-scale, scale, size=d_a),
        "w_att2": rng.uniform(-scale, scale, size=d_a),
        "W_U": rng.uniform(-scale, scale, size=(n_users, d_g)),
        "W_V": rng.uniform(-scale, scale, size=(n_items, d_g)),
        "W_out": rng.uniform(-scale, scale, size=spec.output_dim(d_a, d_g)),
    }
    matrices = {name: np.ascontiguousarray(matrices[name], dtype=dtype) for name in MATRIX_NAMES}
    trainable = {name: name not in spec.unused for name in MATRIX_NAMES}

    logger.debug(
        f"Initialized {config.variant} parameters: |U|={n_users}, |V|={n_items}, |A|+1={n_aspect_rows}, "
        f"d_a={d_a}, d_g={d_g}, dtype={dtype}"
    )
    return ModelParams(config=config, matrices=matrices, trainable=trainable)
