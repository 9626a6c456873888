import logging
from dataclasses import dataclass

import numpy as np
from src.schemas.corpus.models import PAD_INDEX, AspectSets
from src.schemas.model.models import DropoutMasks, ForwardTrace, ModelParams, VariantSpec
from src.services.variants.registry import get_variant

from .ops import (
    aspect_attention,
    attention_over_context,
    check_indices,
    masked_sum,
    normalize_rows,
    normalize_rows_backward,
    project,
    user_pool,
)

logger = logging.getLogger(__name__)

ASPECT_MATRICES = frozenset({"W_A", "W_trans", "w_att1", "w_att2"})


def draw_dropout_masks(
    rng: np.random.Generator,
    n: int,
    d_g: int,
    d_a: int,
    rate: float,
    dtype: np.dtype | str = np.float64,
) -> DropoutMasks:
    """Inverted dropout: keep with probability 1 - rate, scale survivors by 1/(1 - rate)."""
    if rate <= 0.0:
        return DropoutMasks(global_mask=np.ones((n, d_g), dtype=dtype), aspect_mask=np.ones((n, d_a), dtype=dtype))
    scale = 1.0 / (1.0 - rate)
    global_mask = (rng.random((n, d_g)) >= rate).astype(dtype) * scale
    aspect_mask = (rng.random((n, d_a)) >= rate).astype(dtype) * scale
    return DropoutMasks(global_mask=global_mask, aspect_mask=aspect_mask)


@dataclass
class BatchForward:
    """Everything the reverse pass needs from one forward pass."""

    users: np.ndarray
    items: np.ndarray
    scores: np.ndarray
    z: np.ndarray
    masks: DropoutMasks | None = None
    y_global: np.ndarray | None = None
    y_aspect: np.ndarray | None = None
    # Aspect part
    c_table: np.ndarray | None = None
    norms: np.ndarray | None = None
    referenced: np.ndarray | None = None
    user_idx: np.ndarray | None = None
    item_idx: np.ndarray | None = None
    user_mask: np.ndarray | None = None
    item_mask: np.ndarray | None = None
    shared_mask: np.ndarray | None = None
    c_user: np.ndarray | None = None
    c_item: np.ndarray | None = None
    beta: np.ndarray | None = None
    pooled: np.ndarray | None = None
    context: np.ndarray | None = None
    alpha: np.ndarray | None = None
    h: np.ndarray | None = None


class AARMEngine:
    """Batched scoring graph with its exact reverse pass.

    The forward pass follows the variant assembly; the backward pass returns gradients
    of the batch objective w.r.t. the trainable matrices only.
    """

    def __init__(self, params: ModelParams, aspect_sets: AspectSets, spec: VariantSpec | None = None):
        self.params = params
        self.aspect_sets = aspect_sets
        self.spec = spec or get_variant(params.config.variant)
        self.mode = params.config.masking_mode

    @property
    def dtype(self) -> np.dtype:
        return self.params.dtype

    def dropout_masks(self, n: int, rng: np.random.Generator) -> DropoutMasks:
        config = self.params.config
        return draw_dropout_masks(rng, n, config.d_g, config.d_a, config.dropout, self.dtype)

    def forward(self, users: np.ndarray, items: np.ndarray, masks: DropoutMasks | None = None) -> BatchForward:
        """Score (users[b], items[b]) pairs.

        :param users: (B,) user indices
        :param items: (B,) item indices
        :param masks: Dropout multipliers for training mode; None is inference mode
        :returns: Scores plus cached intermediates
        """
        matrices = self.params.matrices
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        check_indices(users, self.aspect_sets.user_indices.shape[0], "user")
        check_indices(items, self.aspect_sets.item_indices.shape[0], "item")

        parts: list[np.ndarray] = []
        fwd = BatchForward(users=users, items=items, scores=np.empty(0), z=np.empty(0), masks=masks)

        if self.spec.use_global:
            check_indices(users, matrices["W_U"].shape[0], "user")
            check_indices(items, matrices["W_V"].shape[0], "item")
            y_global = matrices["W_U"][users] * matrices["W_V"][items]
            fwd.y_global = y_global
            parts.append(y_global * masks.global_mask if masks is not None else y_global)

        if self.spec.use_aspect:
            y_aspect = self._aspect_forward(fwd)
            fwd.y_aspect = y_aspect
            parts.append(y_aspect * masks.aspect_mask if masks is not None else y_aspect)

        fwd.z = np.concatenate(parts, axis=1)
        fwd.scores = fwd.z @ matrices["W_out"]
        return fwd

    def _aspect_forward(self, fwd: BatchForward) -> np.ndarray:
        matrices = self.params.matrices
        sets = self.aspect_sets
        spec = self.spec

        user_idx = sets.user_indices[fwd.users]
        item_idx = sets.item_indices[fwd.items]
        user_mask = sets.user_mask[fwd.users]
        item_mask = sets.item_mask[fwd.items]

        # Normalized embeddings depend only on the aspect index
        referenced = np.zeros(matrices["W_A"].shape[0], dtype=bool)
        referenced[user_idx[user_mask]] = True
        referenced[item_idx[item_mask]] = True
        referenced[PAD_INDEX] = False
        z_table, norms = project(matrices["W_A"], matrices["W_trans"])
        c_table = normalize_rows(z_table, norms, referenced)

        c_user = c_table[user_idx] * user_mask[..., None]
        c_item = c_table[item_idx] * item_mask[..., None]

        fwd.c_table, fwd.norms, fwd.referenced = c_table, norms, referenced
        fwd.user_idx, fwd.item_idx = user_idx, item_idx
        fwd.user_mask, fwd.item_mask = user_mask, item_mask
        fwd.c_user, fwd.c_item = c_user, c_item

        attended_mask = user_mask
        if spec.aspect_pool == "shared_self" or spec.user_context == "shared":
            same = (user_idx[:, :, None] == item_idx[:, None, :]) & user_mask[:, :, None] & item_mask[:, None, :]
            attended_mask = same.any(axis=2)
            fwd.shared_mask = attended_mask

        if spec.aspect_pool == "attention":
            beta = aspect_attention(c_user, c_item, user_mask, item_mask, matrices["w_att1"], self.mode)
            pooled = np.einsum("bij,bjd->bid", beta, c_item)
            h = c_user * pooled
            fwd.beta, fwd.pooled = beta, pooled
        elif spec.aspect_pool == "sum":
            pooled = masked_sum(c_item, item_mask)
            h = c_user * pooled[:, None, :]
            fwd.pooled = pooled
        else:
            h = c_user * c_user * attended_mask[..., None]
        fwd.h = h

        if spec.user_pool == "sum":
            return h.sum(axis=1)

        if spec.user_context == "item":
            context = masked_sum(c_item, item_mask)
        elif spec.user_context == "user":
            context = masked_sum(c_user, user_mask)
        else:
            context = masked_sum(c_user, attended_mask)
        alpha = attention_over_context(c_user, context, attended_mask, matrices["w_att2"], self.mode)
        fwd.context, fwd.alpha = context, alpha
        return user_pool(h, alpha)

    def backward(self, fwd: BatchForward, grad_scores: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of sum_b grad_scores[b] * score[b] w.r.t. the trainable matrices.

        :param fwd: Result of :meth:`forward`
        :param grad_scores: (B,) upstream derivative of the objective w.r.t. each score
        :returns: One array per trainable matrix, shape-matched
        """
        matrices = self.params.matrices
        trainable = set(self.params.trainable_names())
        grads: dict[str, np.ndarray] = {}
        upstream = np.asarray(grad_scores, dtype=self.dtype)

        if "W_out" in trainable:
            grads["W_out"] = fwd.z.T @ upstream
        d_z = upstream[:, None] * matrices["W_out"][None, :]

        offset = 0
        if self.spec.use_global:
            d_g = matrices["W_U"].shape[1]
            d_global = d_z[:, :d_g]
            if fwd.masks is not None:
                d_global = d_global * fwd.masks.global_mask
            offset = d_g
            if "W_U" in trainable:
                grad_u = np.zeros_like(matrices["W_U"])
                np.add.at(grad_u, fwd.users, d_global * matrices["W_V"][fwd.items])
                grads["W_U"] = grad_u
            if "W_V" in trainable:
                grad_v = np.zeros_like(matrices["W_V"])
                np.add.at(grad_v, fwd.items, d_global * matrices["W_U"][fwd.users])
                grads["W_V"] = grad_v

        if self.spec.use_aspect and trainable & ASPECT_MATRICES:
            d_aspect = d_z[:, offset:]
            if fwd.masks is not None:
                d_aspect = d_aspect * fwd.masks.aspect_mask
            grads.update(self._aspect_backward(fwd, d_aspect, trainable))
        return grads

    def _aspect_backward(self, fwd: BatchForward, d_aspect: np.ndarray, trainable: set[str]) -> dict[str, np.ndarray]:
        matrices = self.params.matrices
        spec = self.spec
        grads: dict[str, np.ndarray] = {}
        assert fwd.c_user is not None and fwd.c_item is not None and fwd.h is not None
        c_user, c_item = fwd.c_user, fwd.c_item
        d_cu = np.zeros_like(c_user)
        d_cv = np.zeros_like(c_item)

        if spec.user_pool == "attention":
            alpha, context = fwd.alpha, fwd.context
            assert alpha is not None and context is not None
            d_alpha = np.einsum("bid,bd->bi", fwd.h, d_aspect)
            d_h = alpha[:, :, None] * d_aspect[:, None, :]
            d_logit = alpha * (d_alpha - (alpha * d_alpha).sum(axis=1, keepdims=True))
            w_att2 = matrices["w_att2"]
            if "w_att2" in trainable:
                grads["w_att2"] = np.einsum("bi,bid,bd->d", d_logit, c_user, context)
            d_cu += d_logit[:, :, None] * (context * w_att2)[:, None, :]
            d_context = np.einsum("bi,bid->bd", d_logit, c_user) * w_att2
            if spec.user_context == "item":
                d_cv += d_context[:, None, :] * fwd.item_mask[..., None]
            elif spec.user_context == "user":
                d_cu += d_context[:, None, :] * fwd.user_mask[..., None]
            else:
                d_cu += d_context[:, None, :] * fwd.shared_mask[..., None]
        else:
            d_h = np.broadcast_to(d_aspect[:, None, :], c_user.shape)

        if spec.aspect_pool == "attention":
            beta, pooled = fwd.beta, fwd.pooled
            assert beta is not None and pooled is not None
            d_cu += d_h * pooled
            d_pooled = d_h * c_user
            d_beta = np.einsum("bid,bjd->bij", d_pooled, c_item)
            d_cv += np.einsum("bij,bid->bjd", beta, d_pooled)
            d_logits = beta * (d_beta - (beta * d_beta).sum(axis=2, keepdims=True))
            w_att1 = matrices["w_att1"]
            logit_item = np.einsum("bij,bjd->bid", d_logits, c_item)
            if "w_att1" in trainable:
                grads["w_att1"] = np.einsum("bid,bid->d", c_user, logit_item)
            d_cu += logit_item * w_att1
            d_cv += np.einsum("bij,bid->bjd", d_logits, c_user) * w_att1
        elif spec.aspect_pool == "sum":
            pooled = fwd.pooled
            assert pooled is not None
            d_cu += d_h * pooled[:, None, :]
            d_cv += np.einsum("bid,bid->bd", d_h, c_user)[:, None, :] * fwd.item_mask[..., None]
        else:
            d_cu += 2.0 * d_h * c_user * fwd.shared_mask[..., None]

        if not trainable & {"W_A", "W_trans"}:
            return grads

        d_c_table = np.zeros_like(fwd.c_table)
        np.add.at(d_c_table, fwd.user_idx, d_cu * fwd.user_mask[..., None])
        np.add.at(d_c_table, fwd.item_idx, d_cv * fwd.item_mask[..., None])
        d_z_table = normalize_rows_backward(d_c_table, fwd.c_table, fwd.norms, fwd.referenced)

        if "W_trans" in trainable:
            grads["W_trans"] = d_z_table.T @ matrices["W_A"]
        if "W_A" in trainable:
            grad_a = d_z_table @ matrices["W_trans"]
            grad_a[PAD_INDEX] = 0.0
            grads["W_A"] = grad_a
        return grads

    def score_items(self, user: int, items: np.ndarray | None = None, chunk: int = 256) -> np.ndarray:
        """Inference-mode scores of one user against many items."""
        if items is None:
            items = np.arange(self.aspect_sets.item_indices.shape[0], dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        scores = np.empty(len(items), dtype=np.float64)
        for start in range(0, len(items), chunk):
            part = items[start : start + chunk]
            scores[start : start + len(part)] = self.forward(np.full(len(part), user, dtype=np.int64), part).scores
        return scores

    def trace(self, user: int, item: int, masks: DropoutMasks | None = None) -> ForwardTrace:
        fwd = self.forward(np.array([user]), np.array([item]), masks)

        def first(array: np.ndarray | None) -> np.ndarray | None:
            return None if array is None else array[0]

        sets = self.aspect_sets
        return ForwardTrace(
            score=float(fwd.scores[0]),
            user_mask=sets.user_mask[user],
            item_mask=sets.item_mask[item],
            c_user=first(fwd.c_user),
            c_item=first(fwd.c_item),
            beta=first(fwd.beta),
            alpha=first(fwd.alpha),
            h=first(fwd.h),
            y_aspect=first(fwd.y_aspect),
            y_global=first(fwd.y_global),
            dropout=masks,
            shared_mask=first(fwd.shared_mask),
        )


def score(
    user: int,
    item: int,
    params: ModelParams,
    aspect_sets: AspectSets,
    dropout_mode: str = "inference",
    rng: np.random.Generator | None = None,
) -> tuple[float, ForwardTrace]:
    """Score one (user, item) pair.

    :param dropout_mode: ``inference`` (no dropout) or ``training`` (fresh inverted-dropout masks)
    :returns: The score and its forward trace
    """
    engine = AARMEngine(params, aspect_sets)
    masks = None
    if dropout_mode == "training":
        masks = engine.dropout_masks(1, rng or np.random.default_rng())
    trace = engine.trace(user, item, masks)
    return trace.score, trace
