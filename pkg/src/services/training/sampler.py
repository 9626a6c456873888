import logging

import numpy as np
from src.exceptions import NegativeSamplingError

logger = logging.getLogger(__name__)


def sample_negative(user: int, positives: np.ndarray, n_items: int, rng: np.random.Generator) -> int:
    """Uniform draw from the items ``user`` has no train positive with.

    :param user: User index (for diagnostics)
    :param positives: The user's train positive item indices
    :param n_items: |V|
    :param rng: Random generator
    :raises NegativeSamplingError: the user purchased every item
    """
    positive_set = set(int(i) for i in positives)
    if len(positive_set) >= n_items:
        raise NegativeSamplingError(f"User {user} has no unpurchased item to sample from")
    if len(positive_set) * 2 > n_items:
        complement = np.setdiff1d(np.arange(n_items), positives)
        return int(rng.choice(complement))
    while True:
        item = int(rng.integers(n_items))
        if item not in positive_set:
            return item


class NegativeSampler:
    """Vectorized rejection sampler of one negative per (user, positive) pair."""

    def __init__(self, positives_by_user: list[np.ndarray], n_items: int):
        self.n_items = n_items
        counts = np.array([len(items) for items in positives_by_user], dtype=np.int64)
        saturated = np.flatnonzero(counts >= n_items)
        if saturated.size:
            raise NegativeSamplingError(
                f"{saturated.size} users (e.g. index {int(saturated[0])}) have no unpurchased item to sample from"
            )
        keys = [user * n_items + items for user, items in enumerate(positives_by_user) if len(items)]
        self._keys = np.sort(np.concatenate(keys)) if keys else np.empty(0, dtype=np.int64)

    def is_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        if not self._keys.size:
            return np.zeros(len(users), dtype=bool)
        keys = users.astype(np.int64) * self.n_items + items
        position = np.minimum(np.searchsorted(self._keys, keys), self._keys.size - 1)
        return self._keys[position] == keys

    def sample(self, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        items = rng.integers(self.n_items, size=len(users))
        pending = np.flatnonzero(self.is_positive(users, items))
        while pending.size:
            items[pending] = rng.integers(self.n_items, size=pending.size)
            pending = pending[self.is_positive(users[pending], items[pending])]
        return items
