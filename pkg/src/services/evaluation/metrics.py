import numpy as np


def hits(ranked: list[int] | np.ndarray, truth: set[int]) -> np.ndarray:
    return np.array([int(item) in truth for item in ranked], dtype=bool)


def recall(ranked: list[int] | np.ndarray, truth: set[int]) -> float:
    """Share of the user's ground-truth items that were recommended."""
    if not truth:
        raise ValueError("Recall is undefined for an empty ground truth")
    return float(hits(ranked, truth).sum()) / len(truth)


def precision(ranked: list[int] | np.ndarray, truth: set[int], n: int | None = None) -> float:
    """Share of the N recommended items that are ground truth."""
    n = len(ranked) if n is None else n
    if n <= 0:
        return 0.0
    return float(hits(ranked[:n], truth).sum()) / n


def dcg(relevance: np.ndarray) -> float:
    ranks = np.arange(1, len(relevance) + 1)
    return float(np.sum((2.0 ** relevance.astype(np.float64) - 1.0) / np.log2(ranks + 1)))


def ndcg(ranked: list[int] | np.ndarray, truth: set[int], n: int | None = None) -> float:
    """Binary-relevance NDCG@N; the ideal list holds min(|truth|, N) relevant items."""
    if not truth:
        raise ValueError("NDCG is undefined for an empty ground truth")
    n = len(ranked) if n is None else n
    relevance = hits(ranked[:n], truth)
    ideal = np.zeros(n, dtype=bool)
    ideal[: min(len(truth), n)] = True
    best = dcg(ideal)
    return dcg(relevance) / best if best > 0 else 0.0


def hit(ranked: list[int] | np.ndarray, truth: set[int]) -> int:
    return int(hits(ranked, truth).any())


def hit_ratio(user_hits: list[int] | np.ndarray) -> float:
    """Fraction of testing users with at least one hit."""
    flags = np.asarray(user_hits)
    return float(flags.sum()) / len(flags) if len(flags) else 0.0
