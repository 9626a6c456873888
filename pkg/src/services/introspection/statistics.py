import logging

import numpy as np
from src.schemas.corpus.models import PAD_INDEX, DatasetStatistics
from src.schemas.introspection.models import SharedAspectHistogram
from src.services.corpus.bundle import DatasetBundle

logger = logging.getLogger(__name__)

OVERFLOW_BUCKET = 6


def _entity_sets(bundle: DatasetBundle, truncated: bool) -> tuple[list[np.ndarray], list[np.ndarray]]:
    sets = bundle.aspect_sets
    if truncated:
        users = [row[row != PAD_INDEX] for row in sets.user_indices]
        items = [row[row != PAD_INDEX] for row in sets.item_indices]
    else:
        users = [np.array(raw, dtype=np.int64) for raw in sets.user_raw]
        items = [np.array(raw, dtype=np.int64) for raw in sets.item_raw]
    return users, items


def item_postings(items: list[np.ndarray]) -> dict[int, np.ndarray]:
    """Aspect index -> sorted items whose set contains it."""
    postings: dict[int, list[int]] = {}
    for item, aspects in enumerate(items):
        for aspect in aspects.tolist():
            postings.setdefault(aspect, []).append(item)
    return {aspect: np.array(members, dtype=np.int64) for aspect, members in postings.items()}


def shared_counts_for_user(aspects: np.ndarray, postings: dict[int, np.ndarray], n_items: int) -> np.ndarray:
    """|A_u ∩ A_v| for every item v."""
    hits = [postings[a] for a in aspects.tolist() if a in postings]
    if not hits:
        return np.zeros(n_items, dtype=np.int64)
    return np.bincount(np.concatenate(hits), minlength=n_items)


def _histogram(counts: np.ndarray, n_pairs: int, mode: str, truncated: bool) -> SharedAspectHistogram:
    ratios = (counts / n_pairs).tolist() if n_pairs else [0.0] * len(counts)
    return SharedAspectHistogram(counts=counts.tolist(), ratios=ratios, n_pairs=n_pairs, mode=mode, truncated=truncated)


def shared_aspect_distribution(
    bundle: DatasetBundle,
    truncated: bool = False,
    sample_pairs: int = 1_000_000,
    exact_limit: int = 5_000_000,
    exact: bool | None = None,
    seed: int = 2019,
) -> SharedAspectHistogram:
    """Histogram of shared-aspect counts over user x product pairs, buckets 0..5 and >5.

    :param bundle: Prepared dataset
    :param truncated: Count on the padded model sets instead of the raw sets
    :param sample_pairs: Number of random pairs in sampled mode
    :param exact_limit: Traverse every pair when |U|*|V| is at most this
    :param exact: Force exact (True) or sampled (False) mode
    :param seed: Sampling seed
    """
    users, items = _entity_sets(bundle, truncated)
    total = len(users) * len(items)
    use_exact = exact if exact is not None else total <= exact_limit

    counts = np.zeros(OVERFLOW_BUCKET + 1, dtype=np.int64)
    if use_exact:
        postings = item_postings(items)
        for aspects in users:
            shared = shared_counts_for_user(aspects, postings, len(items))
            counts += np.bincount(np.minimum(shared, OVERFLOW_BUCKET), minlength=OVERFLOW_BUCKET + 1)
        histogram = _histogram(counts, total, "exact", truncated)
    else:
        rng = np.random.default_rng(seed)
        sampled_users = rng.integers(len(users), size=sample_pairs)
        sampled_items = rng.integers(len(items), size=sample_pairs)
        user_sets = [frozenset(aspects.tolist()) for aspects in users]
        item_sets = [frozenset(aspects.tolist()) for aspects in items]
        shared = np.fromiter(
            (len(user_sets[u] & item_sets[v]) for u, v in zip(sampled_users, sampled_items, strict=True)),
            dtype=np.int64,
            count=sample_pairs,
        )
        counts += np.bincount(np.minimum(shared, OVERFLOW_BUCKET), minlength=OVERFLOW_BUCKET + 1)
        histogram = _histogram(counts, sample_pairs, "sampled", truncated)

    logger.info(
        f"Shared-aspect distribution ({histogram.mode}, {histogram.n_pairs} pairs): "
        + ", ".join(f"{bucket}: {value:.3f}%" for bucket, value in histogram.percent.items())
    )
    return histogram


def dataset_statistics(bundle: DatasetBundle) -> DatasetStatistics:
    return bundle.statistics()
