import logging
import math
from collections import Counter
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field
from src.schemas.corpus.models import (
    PAD_INDEX,
    AspectSets,
    AspectVocabulary,
    InteractionRecord,
    InteractionTable,
    SplitLabel,
)

logger = logging.getLogger(__name__)

AspectSource = Literal["train", "all"]


def source_records(table: InteractionTable, aspects_from: AspectSource = "train") -> list[InteractionRecord]:
    if aspects_from == "all" or not table.is_split:
        return list(table.records)
    return table.labelled(SplitLabel.TRAIN)


def build_vocabulary(table: InteractionTable, aspects_from: AspectSource = "train") -> AspectVocabulary:
    """Collect the aspect set A from train reviews (or all reviews)."""
    aspects = {aspect for record in source_records(table, aspects_from) for aspect in record.aspects}
    vocab = AspectVocabulary.from_aspects(aspects)
    logger.info(f"Aspect vocabulary: {vocab.n_aspects} aspects (+PAD) from {aspects_from} reviews")
    return vocab


class AspectCorpusStats(BaseModel):
    """Term and document frequencies of aspects over one entity side (users or items)."""

    n_entities: int = Field(..., description="Number of users (items) on this side")
    tf: list[Counter[int]] = Field(default_factory=list, description="Aspect mention counts per entity")
    df: Counter[int] = Field(default_factory=Counter, description="Entities mentioning each aspect")


def collect_stats(
    table: InteractionTable,
    vocab: AspectVocabulary,
    side: Literal["user", "item"] = "user",
    aspects_from: AspectSource = "train",
) -> AspectCorpusStats:
    """Count tf_e(a) per entity and df(a) = number of entities mentioning a.

    The entity count is taken over every user (item) in the table.
    """
    index = table.user_index if side == "user" else table.item_index
    stats = AspectCorpusStats(n_entities=len(index), tf=[Counter() for _ in range(len(index))])

    for record in source_records(table, aspects_from):
        entity = index[record.user_id if side == "user" else record.item_id]
        for aspect in record.aspects:
            aspect_idx = vocab.get(aspect)
            if aspect_idx is not None:
                stats.tf[entity][aspect_idx] += 1

    for counts in stats.tf:
        stats.df.update(counts.keys())
    return stats


def tfidf_score(aspect: int, user: int, stats: AspectCorpusStats) -> float:
    """TF-IDF of an aspect for one entity: (tf(a) / sum_i tf(i)) * ln(|U| / (df(a) + 1)).

    :param aspect: Aspect vocabulary index, mentioned by the entity
    :param user: Entity (user or item) index
    :param stats: Frequencies from :func:`collect_stats`
    :returns: TF-IDF score, may be negative when df(a) + 1 > |U|
    """
    counts = stats.tf[user]
    total = sum(counts.values())
    if counts.get(aspect, 0) == 0 or total == 0:
        raise ValueError(f"Aspect {aspect} does not occur for entity {user}")
    return (counts[aspect] / total) * math.log(stats.n_entities / (stats.df[aspect] + 1))


def nearest_rank_quantile(values: list[int], q: float) -> int:
    """Smallest value whose cumulative fraction is >= q."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered) - 1e-9))
    return ordered[min(rank, len(ordered)) - 1]


def truncate_by_tfidf(entity: int, stats: AspectCorpusStats, limit: int) -> list[int]:
    """Keep the ``limit`` highest scoring aspects; ties keep the lower vocabulary index.

    :returns: Kept aspect indices in ascending index order
    """
    candidates = sorted(stats.tf[entity])
    if len(candidates) <= limit:
        return candidates
    ranked = sorted(candidates, key=lambda a: (-tfidf_score(a, entity, stats), a))
    return sorted(ranked[:limit])


def _pad(kept: list[list[int]], width: int) -> tuple[np.ndarray, np.ndarray]:
    indices = np.full((len(kept), width), PAD_INDEX, dtype=np.int64)
    for row, aspects in enumerate(kept):
        indices[row, : len(aspects)] = aspects
    return indices, indices != PAD_INDEX


def build_aspect_sets(
    table: InteractionTable,
    vocab: AspectVocabulary,
    quantile: float = 0.75,
    aspects_from: AspectSource = "train",
) -> AspectSets:
    """Build padded per-user and per-item aspect sets.

    M_u (M_v) is the nearest-rank quantile of raw set sizes; larger sets drop their lowest
    TF-IDF aspects, smaller ones are padded with PAD. Entities without aspects get all-PAD rows.

    :param table: Split interaction table
    :param vocab: Vocabulary built from the same review source
    :param quantile: Quantile of raw set sizes used as the padded length
    :param aspects_from: ``train`` to use train reviews only, ``all`` to use every review
    :returns: Aspect sets with masks and the untruncated raw sets
    """
    user_stats = collect_stats(table, vocab, "user", aspects_from)
    item_stats = collect_stats(table, vocab, "item", aspects_from)

    user_raw = [sorted(counts) for counts in user_stats.tf]
    item_raw = [sorted(counts) for counts in item_stats.tf]

    m_u = max(1, nearest_rank_quantile([len(s) for s in user_raw], quantile))
    m_v = max(1, nearest_rank_quantile([len(s) for s in item_raw], quantile))

    user_kept = [truncate_by_tfidf(uid, user_stats, m_u) for uid in range(user_stats.n_entities)]
    item_kept = [truncate_by_tfidf(iid, item_stats, m_v) for iid in range(item_stats.n_entities)]

    user_indices, user_mask = _pad(user_kept, m_u)
    item_indices, item_mask = _pad(item_kept, m_v)

    empty_users = sum(1 for s in user_raw if not s)
    empty_items = sum(1 for s in item_raw if not s)
    if empty_users or empty_items:
        logger.warning(f"Entities without aspects get all-PAD sets: {empty_users} users, {empty_items} items")
    logger.info(f"Aspect sets built: M_u={m_u}, M_v={m_v} (quantile={quantile})")

    return AspectSets(
        user_indices=user_indices,
        user_mask=user_mask,
        item_indices=item_indices,
        item_mask=item_mask,
        user_raw=user_raw,
        item_raw=item_raw,
    )
