"""Building blocks of the forward computation.

Every op accepts optional leading batch dimensions, so the same code scores one
(user, item) pair or a whole mini-batch. Aspect axes are ``M_u`` for the user side and
``M_v`` for the item side; masks are boolean with False at PAD positions.
"""

import numpy as np
from src.exceptions import DegenerateNormError, UnknownEntityError
from src.schemas.model.models import MaskingMode

NORM_EPS = 1e-12


def project(f: np.ndarray, w_trans: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """z = W_trans f for every row of ``f``; returns (z, ||z||)."""
    z = f @ w_trans.T
    return z, np.linalg.norm(z, axis=-1)


def transform_normalize(f: np.ndarray, w_trans: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """c = W_trans f / ||W_trans f||; PAD rows stay zero.

    :param f: (..., d_a) aspect embeddings
    :param w_trans: (d_a, d_a) transform
    :param mask: (...) boolean, False at PAD; all rows are real when omitted
    :returns: unit-norm rows (zero at PAD)
    :raises DegenerateNormError: a real row has ||W_trans f|| <= 1e-12
    """
    z, norms = project(f, w_trans)
    if mask is None:
        mask = np.ones(norms.shape, dtype=bool)
    return normalize_rows(z, norms, mask)


def normalize_rows(z: np.ndarray, norms: np.ndarray, mask: np.ndarray) -> np.ndarray:
    degenerate = mask & (norms <= NORM_EPS)
    if np.any(degenerate):
        raise DegenerateNormError(
            f"{int(degenerate.sum())} transformed aspect embeddings have norm <= {NORM_EPS:g}"
        )
    safe = np.where(mask, norms, 1.0)
    return np.where(mask[..., None], z / safe[..., None], 0.0)


def normalize_rows_backward(d_c: np.ndarray, c: np.ndarray, norms: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. z of c = z / ||z||, zero at masked rows."""
    radial = np.einsum("...d,...d->...", c, d_c)
    safe = np.where(mask, norms, 1.0)
    return np.where(mask[..., None], (d_c - c * radial[..., None]) / safe[..., None], 0.0)


def aspect_interaction(
    c_i: np.ndarray,
    c_j: np.ndarray,
    mask_i: np.ndarray | bool = True,
    mask_j: np.ndarray | bool = True,
) -> np.ndarray:
    """(c_i * c_j) x_i x_j: zero whenever either side is PAD."""
    x = np.asarray(np.logical_and(mask_i, mask_j))
    return c_i * c_j * x[..., None]


def masked_softmax(logits: np.ndarray, mask: np.ndarray, mode: MaskingMode = "softmax_exclude") -> np.ndarray:
    """Softmax over the last axis.

    ``softmax_exclude`` drops masked entries from the denominator and returns an all-zero
    row when nothing is unmasked. ``literal`` keeps every position (masked logits are zero).
    """
    if mode == "literal":
        shifted = logits - logits.max(axis=-1, keepdims=True)
        weights = np.exp(shifted)
        return weights / weights.sum(axis=-1, keepdims=True)

    masked = np.where(mask, logits, -np.inf)
    top = masked.max(axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    weights = np.where(mask, np.exp(np.where(mask, logits, 0.0) - top), 0.0)
    total = weights.sum(axis=-1, keepdims=True)
    return weights / np.where(total > 0, total, 1.0)


def aspect_attention(
    c_user: np.ndarray,
    c_item: np.ndarray,
    user_mask: np.ndarray,
    item_mask: np.ndarray,
    w_att1: np.ndarray,
    mode: MaskingMode = "softmax_exclude",
) -> np.ndarray:
    """beta[i, j] = softmax_j(w_att1 . (c_i * c_j)); rows of PAD user aspects are zero."""
    logits = np.einsum("...id,...jd->...ij", c_user * w_att1, c_item)
    pair_mask = user_mask[..., :, None] & item_mask[..., None, :]
    beta = masked_softmax(logits, pair_mask, mode)
    return beta * user_mask[..., :, None]


def aspect_pool(c_user: np.ndarray, c_item: np.ndarray, beta: np.ndarray, user_mask: np.ndarray) -> np.ndarray:
    """h_i = sum_j beta[i, j] (c_i * c_j)."""
    pooled = np.einsum("...ij,...jd->...id", beta, c_item)
    return c_user * pooled * user_mask[..., None]


def masked_sum(c: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.einsum("...id,...i->...d", c, mask.astype(c.dtype))


def attention_over_context(
    c_user: np.ndarray,
    context: np.ndarray,
    user_mask: np.ndarray,
    w_att2: np.ndarray,
    mode: MaskingMode = "softmax_exclude",
) -> np.ndarray:
    """alpha_i = softmax_i(w_att2 . (g * c_i)) for a context vector g."""
    logits = np.einsum("...id,...d->...i", c_user, context * w_att2)
    return masked_softmax(logits, user_mask, mode)


def user_attention(
    c_user: np.ndarray,
    c_item: np.ndarray,
    user_mask: np.ndarray,
    item_mask: np.ndarray,
    w_att2: np.ndarray,
    mode: MaskingMode = "softmax_exclude",
) -> np.ndarray:
    """Product-conditioned importance of each user aspect; g_v is the masked sum of item aspects."""
    return attention_over_context(c_user, masked_sum(c_item, item_mask), user_mask, w_att2, mode)


def user_pool(h: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...id->...d", alpha, h)


def global_interaction(
    users: np.ndarray | int,
    items: np.ndarray | int,
    w_user: np.ndarray,
    w_item: np.ndarray,
) -> np.ndarray:
    """y_G = p_u * q_v."""
    users = np.asarray(users)
    items = np.asarray(items)
    check_indices(users, w_user.shape[0], "user")
    check_indices(items, w_item.shape[0], "item")
    return w_user[users] * w_item[items]


def check_indices(indices: np.ndarray, size: int, kind: str) -> None:
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        bad = indices[(indices < 0) | (indices >= size)]
        raise UnknownEntityError(f"Unknown {kind} index {int(bad.flat[0])} (model has {size} {kind}s)")
