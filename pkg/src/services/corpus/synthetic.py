import json
import logging
from pathlib import Path

import numpy as np
from src.schemas.corpus.models import InteractionRecord

logger = logging.getLogger(__name__)

FILLER_WORDS = ["the", "this", "really", "very", "was", "and", "it", "i", "great", "okay", "not", "bought"]


def aspect_name(k: int) -> str:
    return f"feature {k:02d}"


def generate_synthetic_dataset(
    n_users: int = 200,
    n_items: int = 200,
    n_aspects: int = 30,
    aspects_per_user: int = 6,
    aspects_per_item: int = 6,
    interactions_per_user: int = 10,
    smoothing: float = 0.05,
    seed: int = 0,
) -> list[InteractionRecord]:
    """Generate reviews where a user's purchases follow shared latent aspects.

    Every user and item owns a random aspect profile; a user picks items without replacement
    with probability proportional to the shared-aspect count (plus ``smoothing``). Each review
    mentions the shared aspects and one aspect of either side, and carries tokens that place
    the aspect phrases among filler words.

    :returns: Interaction records in user order
    """
    rng = np.random.default_rng(seed)
    user_profiles = [rng.choice(n_aspects, size=aspects_per_user, replace=False) for _ in range(n_users)]
    item_profiles = [rng.choice(n_aspects, size=aspects_per_item, replace=False) for _ in range(n_items)]

    item_matrix = np.zeros((n_items, n_aspects))
    for iid, profile in enumerate(item_profiles):
        item_matrix[iid, profile] = 1.0

    records: list[InteractionRecord] = []
    for uid, profile in enumerate(user_profiles):
        affinity = item_matrix[:, profile].sum(axis=1) + smoothing
        chosen = rng.choice(n_items, size=min(interactions_per_user, n_items), replace=False, p=affinity / affinity.sum())
        for iid in chosen:
            shared = sorted(set(profile.tolist()) & set(item_profiles[iid].tolist()))
            extra = [int(rng.choice(profile)), int(rng.choice(item_profiles[iid]))]
            mentioned = sorted(set(shared) | set(extra))
            aspects = [aspect_name(k) for k in mentioned]

            tokens: list[str] = []
            for aspect in aspects:
                tokens.extend(rng.choice(FILLER_WORDS, size=2).tolist())
                tokens.extend(aspect.split())
            records.append(
                InteractionRecord(
                    user_id=f"u{uid:04d}",
                    item_id=f"i{int(iid):04d}",
                    rating=float(rng.integers(1, 6)),
                    review_tokens=tokens,
                    aspects=aspects,
                )
            )

    logger.info(f"Generated {len(records)} synthetic records ({n_users} users, {n_items} items, {n_aspects} aspects)")
    return records


def write_interactions(records: list[InteractionRecord], path: str | Path) -> Path:
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.model_dump(exclude_none=True), sort_keys=True) + "\n")
    return output
