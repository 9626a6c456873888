import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from src.exceptions import EmptyTestSetError
from src.schemas.evaluation.models import EvalReport, UserMetrics
from src.schemas.model.models import ModelParams
from src.services.corpus.bundle import DatasetBundle
from src.services.model.factory import make_engine

from .metrics import hit, hit_ratio, ndcg, precision, recall

logger = logging.getLogger(__name__)

Scorer = Callable[[int, np.ndarray], np.ndarray]


def rank_candidates(scores: np.ndarray, candidates: np.ndarray, n: int) -> np.ndarray:
    """Candidates by descending score, ties by ascending item index, truncated at N."""
    order = np.lexsort((candidates, -scores))
    return candidates[order[:n]]


def candidate_items(n_items: int, excluded: np.ndarray) -> np.ndarray:
    return np.setdiff1d(np.arange(n_items, dtype=np.int64), excluded, assume_unique=False)


def recommend_top_n(scorer: Scorer, user: int, n_items: int, excluded: np.ndarray, n: int = 10) -> np.ndarray:
    """Top-N list for ``user`` over all items except ``excluded``.

    :param scorer: Maps (user, items) to inference-mode scores
    :param user: User index
    :param n_items: |V|
    :param excluded: The user's train positives
    :param n: List length
    """
    candidates = candidate_items(n_items, excluded)
    if not candidates.size:
        return candidates
    return rank_candidates(scorer(user, candidates), candidates, n)


def average_report(per_user: list[UserMetrics], n: int) -> EvalReport:
    """Arithmetic means over users, in user order."""
    if not per_user:
        return EvalReport(n=n, n_users=0, recall=0.0, precision=0.0, ndcg=0.0, hit_ratio=0.0, users=[])
    return EvalReport(
        n=n,
        n_users=len(per_user),
        recall=float(np.mean([m.recall for m in per_user])),
        precision=float(np.mean([m.precision for m in per_user])),
        ndcg=float(np.mean([m.ndcg for m in per_user])),
        hit_ratio=hit_ratio([m.hit for m in per_user]),
        users=per_user,
    )


class Evaluator:
    """Per-user top-N evaluation against ground-truth item sets.

    Users are independent, so ``threads > 1`` fans them out over a pool; results are
    reduced in user order and therefore do not depend on the thread count.
    """

    def __init__(self, scorer: Scorer, n_items: int, user_ids: list[str], n: int = 10, threads: int = 1):
        self.scorer = scorer
        self.n_items = n_items
        self.user_ids = user_ids
        self.n = n
        self.threads = max(1, threads)

    def evaluate_user(self, user: int, truth: set[int], excluded: np.ndarray) -> UserMetrics:
        ranked = recommend_top_n(self.scorer, user, self.n_items, excluded, self.n)
        return UserMetrics(
            user_id=self.user_ids[user],
            n_truth=len(truth),
            recall=recall(ranked, truth),
            precision=precision(ranked, truth, self.n),
            ndcg=ndcg(ranked, truth, self.n),
            hit=hit(ranked, truth),
        )

    def evaluate(self, truth: dict[int, set[int]], excluded: Callable[[int], np.ndarray]) -> EvalReport:
        """Evaluate every user with a non-empty ground truth.

        :param truth: Ground-truth items per user index
        :param excluded: Items removed from a user's candidate set
        """
        users = sorted(user for user, items in truth.items() if items)

        def run(user: int) -> UserMetrics:
            return self.evaluate_user(user, truth[user], excluded(user))

        if self.threads == 1:
            per_user = [run(user) for user in users]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                per_user = list(pool.map(run, users))
        return average_report(per_user, self.n)


def make_evaluator(params: ModelParams, bundle: DatasetBundle, n: int = 10, threads: int = 1) -> Evaluator:
    engine = make_engine(params, bundle)
    return Evaluator(engine.score_items, bundle.n_items, bundle.table.user_ids, n=n, threads=threads)


def exclusions_except(bundle: DatasetBundle, truth: dict[int, set[int]]) -> Callable[[int], np.ndarray]:
    """Train positives minus the user's ground-truth items, so every truth item stays a candidate."""

    def excluded(user: int) -> np.ndarray:
        held = truth.get(user, set())
        positives = bundle.positives_by_user[user]
        return positives[~np.isin(positives, list(held))] if held else positives

    return excluded


def validation_exclusions(bundle: DatasetBundle) -> Callable[[int], np.ndarray]:
    return exclusions_except(bundle, bundle.validation_truth)


def split_exclusions(bundle: DatasetBundle) -> Callable[[int], np.ndarray]:
    """A (u, v) reviewed in both splits is a train positive and a test item; it stays a candidate."""
    return exclusions_except(bundle, bundle.test_items_by_user)


def evaluate_validation(evaluator: Evaluator, bundle: DatasetBundle) -> EvalReport:
    return evaluator.evaluate(bundle.validation_truth, validation_exclusions(bundle))


def evaluate(params: ModelParams, bundle: DatasetBundle, n: int = 10, threads: int = 1) -> EvalReport:
    """Top-N test evaluation; candidates are all items except the user's train positives that are not test items.

    :raises EmptyTestSetError: no user has a test item
    """
    truth = bundle.test_items_by_user
    if not any(truth.values()):
        raise EmptyTestSetError("No user has test items; nothing to evaluate")

    evaluator = make_evaluator(params, bundle, n=n, threads=threads)
    report = evaluator.evaluate(truth, split_exclusions(bundle))
    logger.info(
        f"Test evaluation @{n} over {report.n_users} users: "
        + ", ".join(f"{name}={value:.3f}%" for name, value in report.percent.items())
    )
    return report
