import logging

import numpy as np
from src.schemas.corpus.models import InteractionTable, ValidationEntry, ValidationSet

from .splitter import positives_by_user

logger = logging.getLogger(__name__)


def build_validation(table: InteractionTable, n_users: int = 1000, seed: int = 2019) -> ValidationSet:
    """Sample users and hold out one of their train items as validation ground truth.

    :param table: Split interaction table
    :param n_users: Number of validation users, clamped to |U|
    :param seed: Sampling seed
    :returns: Validation set ordered by internal user index
    """
    positives = positives_by_user(table)
    eligible = np.array([uid for uid in range(table.n_users) if positives[uid]], dtype=np.int64)
    size = min(n_users, len(eligible))

    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(eligible, size=size, replace=False)) if size else eligible[:0]

    user_ids = table.user_ids
    item_ids = table.item_ids
    entries = []
    for uid in chosen:
        items = sorted(positives[int(uid)])
        held_out = items[int(rng.integers(len(items)))]
        entries.append(ValidationEntry(user_id=user_ids[int(uid)], item_id=item_ids[held_out]))

    logger.info(f"Validation set: {len(entries)} users (requested {n_users})")
    return ValidationSet(entries=entries)


def held_out_pairs(table: InteractionTable, validation: ValidationSet) -> set[tuple[int, int]]:
    return {(table.user_index[entry.user_id], table.item_index[entry.item_id]) for entry in validation.entries}
