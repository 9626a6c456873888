import logging
import math

import numpy as np
from src.schemas.corpus.models import InteractionTable, SplitLabel

logger = logging.getLogger(__name__)


def train_count(n_records: int, ratio: float) -> int:
    """Half-up rounding of ratio * n, at least one train and (for n >= 2) one test record."""
    count = math.floor(ratio * n_records + 0.5 + 1e-9)
    count = max(count, 1)
    if n_records >= 2:
        count = min(count, n_records - 1)
    return min(count, n_records)


def split_train_test(table: InteractionTable, ratio: float = 0.7, seed: int = 2019) -> InteractionTable:
    """Randomly split every user's records into train and test.

    :param table: Unsplit (or previously split) interaction table
    :param ratio: Train fraction per user, in (0, 1)
    :param seed: Seed for the per-user permutations
    :returns: New table carrying one split label per record
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"Split ratio must be in (0, 1), got {ratio}")

    positions: dict[int, list[int]] = {uid: [] for uid in range(table.n_users)}
    for position, record in enumerate(table.records):
        positions[table.user_index[record.user_id]].append(position)

    rng = np.random.default_rng(seed)
    labels = [SplitLabel.TEST] * table.n_records
    for uid in range(table.n_users):
        user_positions = positions[uid]
        n_train = train_count(len(user_positions), ratio)
        order = rng.permutation(len(user_positions))
        for k in order[:n_train]:
            labels[user_positions[int(k)]] = SplitLabel.TRAIN

    n_train_total = sum(1 for label in labels if label == SplitLabel.TRAIN)
    logger.info(f"Split {table.n_records} records: {n_train_total} train / {table.n_records - n_train_total} test (ratio={ratio})")
    return table.model_copy(update={"split": labels})


def binarize(table: InteractionTable) -> set[tuple[int, int]]:
    """Every distinct train (user, item) pair is one positive; star values are ignored."""
    return {(table.user_index[record.user_id], table.item_index[record.item_id]) for record in table.train_records()}


def positives_by_user(table: InteractionTable) -> dict[int, set[int]]:
    grouped: dict[int, set[int]] = {uid: set() for uid in range(table.n_users)}
    for uid, iid in binarize(table):
        grouped[uid].add(iid)
    return grouped
