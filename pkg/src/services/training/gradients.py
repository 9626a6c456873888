import logging

import numpy as np
from pydantic import BaseModel, ConfigDict
from src.exceptions import NonFiniteGradientError
from src.schemas.model.models import DropoutMasks, ModelParams
from src.services.model.engine import AARMEngine

from .loss import bpr_loss, bpr_loss_grad, l2_gradient, l2_penalty

logger = logging.getLogger(__name__)


class TrainingBatch(BaseModel):
    """(u, v+, v-) triples."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    users: np.ndarray
    pos_items: np.ndarray
    neg_items: np.ndarray

    def __len__(self) -> int:
        return len(self.users)


def batch_objective(
    engine: AARMEngine,
    batch: TrainingBatch,
    l2: float,
    masks: DropoutMasks | None = None,
) -> float:
    """Mean BPR loss of the batch plus the L2 penalty, without gradients."""
    users = np.concatenate([batch.users, batch.users])
    items = np.concatenate([batch.pos_items, batch.neg_items])
    scores = engine.forward(users, items, masks).scores
    n = len(batch)
    return float(np.mean(bpr_loss(scores[:n], scores[n:]))) + l2_penalty(engine.params, l2)


def compute_gradients(
    engine: AARMEngine,
    batch: TrainingBatch,
    l2: float,
    masks: DropoutMasks | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch objective and its exact gradients w.r.t. every trainable matrix.

    Row b of ``masks`` applies to the positive example b, row B + b to the negative one;
    the same masks serve the loss and the reverse pass.

    :param engine: Scoring engine over the current parameters
    :param batch: Training triples
    :param l2: Regularization strength
    :param masks: Dropout multipliers for the 2B examples; None disables dropout
    :returns: (loss, gradients)
    :raises NonFiniteGradientError: loss or any gradient entry is NaN or infinite
    """
    n = len(batch)
    users = np.concatenate([batch.users, batch.users])
    items = np.concatenate([batch.pos_items, batch.neg_items])
    fwd = engine.forward(users, items, masks)
    pos, neg = fwd.scores[:n], fwd.scores[n:]

    loss = float(np.mean(bpr_loss(pos, neg))) + l2_penalty(engine.params, l2)
    d_pos = bpr_loss_grad(pos, neg) / n
    grads = engine.backward(fwd, np.concatenate([d_pos, -d_pos]))
    if l2 > 0.0:
        for name, penalty in l2_gradient(engine.params, l2).items():
            grads[name] = grads[name] + penalty

    if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
        bad = [name for name, g in grads.items() if not np.isfinite(g).all()]
        diagnostics = (
            f"loss={loss}, non-finite gradients: {', '.join(bad) or 'none'}, batch size {n}, "
            f"users {batch.users[:5].tolist()}..., max |score| {float(np.nanmax(np.abs(fwd.scores))):.4g}"
        )
        logger.error(f"Non-finite training step: {diagnostics}")
        raise NonFiniteGradientError(diagnostics)
    return loss, grads


def gradients(
    batch: TrainingBatch,
    params: ModelParams,
    engine: AARMEngine,
    l2: float = 0.0,
    masks: DropoutMasks | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and GradientSet for ``params``; the engine must wrap the same parameters."""
    if engine.params is not params:
        engine = AARMEngine(params, engine.aspect_sets, engine.spec)
    return compute_gradients(engine, batch, l2, masks)
