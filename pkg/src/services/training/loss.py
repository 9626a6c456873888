import numpy as np
from src.schemas.model.models import REGULARIZED, ModelParams


def sigmoid(x: np.ndarray | float) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def bpr_loss(pos_scores: np.ndarray | float, neg_scores: np.ndarray | float) -> np.ndarray | float:
    """-log sigma(pos - neg), evaluated as softplus(neg - pos)."""
    loss = np.logaddexp(0.0, -(np.asarray(pos_scores) - np.asarray(neg_scores)))
    return float(loss) if np.ndim(loss) == 0 else loss


def bpr_loss_grad(pos_scores: np.ndarray, neg_scores: np.ndarray) -> np.ndarray:
    """d loss / d pos per pair; the negative side gets the opposite sign."""
    return -sigmoid(-(pos_scores - neg_scores))


def l2_penalty(params: ModelParams, l2: float, names: tuple[str, ...] | None = None) -> float:
    """l2 times the sum over W_U, W_V, W_out of their mean squared element.

    :param params: Model parameters
    :param l2: Regularization strength
    :param names: Matrices to penalize; defaults to the trainable ones among W_U, W_V, W_out
    """
    if l2 == 0.0:
        return 0.0
    if names is None:
        names = regularized_names(params)
    return float(l2 * sum(np.mean(np.square(params.matrices[name], dtype=np.float64)) for name in names))


def l2_gradient(params: ModelParams, l2: float, names: tuple[str, ...] | None = None) -> dict[str, np.ndarray]:
    if names is None:
        names = regularized_names(params)
    return {name: (2.0 * l2 / params.matrices[name].size) * params.matrices[name] for name in names}


def regularized_names(params: ModelParams) -> tuple[str, ...]:
    return tuple(name for name in REGULARIZED if params.trainable.get(name, False))
