from src.schemas.training.models import ValidationMetrics

MEASURES = ("recall", "precision", "ndcg", "hit_ratio")


def failing_streaks(history: list[ValidationMetrics]) -> dict[str, int]:
    """Consecutive trailing checkpoints at which each measure did not beat its best so far."""
    best: dict[str, float] = {}
    streaks = dict.fromkeys(MEASURES, 0)
    for checkpoint in history:
        values = checkpoint.measures()
        for name in MEASURES:
            if name not in best or values[name] > best[name]:
                best[name] = values[name]
                streaks[name] = 0
            else:
                streaks[name] += 1
    return streaks


def should_stop(history: list[ValidationMetrics], patience: int = 4, min_failing: int = 2) -> bool:
    """Stop once ``min_failing`` measures have failed to improve for ``patience`` checkpoints."""
    streaks = failing_streaks(history)
    return sum(streak >= patience for streak in streaks.values()) >= min_failing


def best_checkpoint(history: list[ValidationMetrics], measure: str = "ndcg") -> ValidationMetrics | None:
    """Earliest checkpoint with the highest value of ``measure``."""
    best: ValidationMetrics | None = None
    for checkpoint in history:
        if best is None or getattr(checkpoint, measure) > getattr(best, measure):
            best = checkpoint
    return best
