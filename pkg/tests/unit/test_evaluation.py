import math
from types import SimpleNamespace

import numpy as np
import pytest
from src.exceptions import EmptyTestSetError
from src.schemas.corpus.models import InteractionTable, SplitLabel, ValidationSet
from src.schemas.evaluation.models import UserMetrics
from src.services.corpus.aspects import build_aspect_sets, build_vocabulary
from src.services.corpus.bundle import DatasetBundle
from src.services.evaluation.evaluator import (
    Evaluator,
    average_report,
    candidate_items,
    evaluate,
    evaluate_validation,
    make_evaluator,
    rank_candidates,
    recommend_top_n,
    split_exclusions,
    validation_exclusions,
)
from src.services.evaluation.metrics import hit, hit_ratio, ndcg, precision, recall
from src.services.model.factory import make_model_params

from tests.factories import record


def reference_metrics(ranked: list[int], truth: set[int], n: int) -> tuple[float, float, float, int]:
    """Loop-by-loop recall, precision, NDCG and hit of one top-N list."""
    gains = [1 if item in truth else 0 for item in ranked[:n]]
    dcg_value = 0.0
    for rank, gain in enumerate(gains, start=1):
        dcg_value += gain / math.log2(rank + 1)
    ideal = 0.0
    for rank in range(1, min(len(truth), n) + 1):
        ideal += 1.0 / math.log2(rank + 1)
    return sum(gains) / len(truth), sum(gains) / n, dcg_value / ideal, int(sum(gains) > 0)


class TestMetrics:
    def test_recall_counts_recommended_truth(self):
        assert recall([3, 8, 1, 5, 9], {3, 5, 6, 7}) == 0.5
        assert recall([4, 7, 1, 9, 2], {7, 3}) == pytest.approx(0.5)

    def test_precision_divides_by_list_length(self):
        assert precision([0, 11, 2, 3, 12, 5, 6, 7, 8, 9], {11, 12, 30}) == pytest.approx(0.2)
        assert precision([0, 1, 2, 3, 4, 5, 6, 7, 8, 9], {11, 12}) == 0.0
        assert precision([4, 7, 1, 9, 2], {7, 3}) == pytest.approx(0.2)
        assert precision([4, 7], {7}, n=10) == pytest.approx(0.1)

    def test_ndcg_single_truth_at_rank_three(self):
        assert ndcg([5, 6, 1, 8], {1}) == pytest.approx(0.5)

    def test_ndcg_ideal_list_is_capped_at_n(self):
        assert ndcg([1, 2], {1, 2, 3, 4}, n=2) == pytest.approx(1.0)
        expected = (1 / math.log2(3)) / (1 + 1 / math.log2(3))
        assert ndcg([9, 2], {1, 2}, n=2) == pytest.approx(expected)

    def test_hit_ratio(self):
        assert hit_ratio([1, 0, 0, 1, 0, 1, 0, 0]) == pytest.approx(0.375)
        assert hit([3, 4], {4}) == 1
        assert hit([3, 4], {5}) == 0

    def test_hit_ratio_extremes(self):
        assert hit_ratio([1, 1, 1]) == 1.0
        assert hit_ratio([0, 0, 0, 0]) == 0.0

    def test_metrics_match_reference_on_random_lists(self):
        rng = np.random.default_rng(42)
        user_hits, expected_hits = [], []
        for _ in range(100):
            n_items = int(rng.integers(5, 60))
            n = int(rng.integers(1, 15))
            truth = set(rng.choice(n_items, size=int(rng.integers(1, min(8, n_items) + 1)), replace=False).tolist())
            ranked = rng.permutation(n_items)[:n].tolist()

            expected = reference_metrics(ranked, truth, n)
            assert abs(recall(ranked, truth) - expected[0]) <= 1e-12
            assert abs(precision(ranked, truth, n) - expected[1]) <= 1e-12
            assert abs(ndcg(ranked, truth, n) - expected[2]) <= 1e-12
            assert hit(ranked, truth) == expected[3]
            user_hits.append(hit(ranked, truth))
            expected_hits.append(expected[3])

        assert abs(hit_ratio(user_hits) - sum(expected_hits) / len(expected_hits)) <= 1e-12

    def test_empty_truth_is_rejected(self):
        with pytest.raises(ValueError):
            recall([1], set())
        with pytest.raises(ValueError):
            ndcg([1], set())


def brute_force_top_n(scores: dict[int, float], excluded: set[int], n: int) -> list[int]:
    candidates = [item for item in scores if item not in excluded]
    return sorted(candidates, key=lambda item: (-scores[item], item))[:n]


class TestRanking:
    def test_ties_rank_lower_index_first(self):
        ranked = rank_candidates(np.array([0.5, 0.9, 0.5, 0.9]), np.array([7, 3, 2, 5]), n=4)
        assert ranked.tolist() == [3, 5, 2, 7]

    def test_candidates_exclude_train_positives(self):
        assert candidate_items(6, np.array([1, 4])).tolist() == [0, 2, 3, 5]

    def test_recommend_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n_items = int(rng.integers(5, 40))
            # Coarse scores produce ties
            table = np.round(rng.normal(size=n_items), 1)
            excluded = rng.choice(n_items, size=int(rng.integers(0, n_items - 1)), replace=False)
            n = int(rng.integers(1, 12))

            ranked = recommend_top_n(lambda _u, items, t=table: t[items], 0, n_items, excluded, n)

            expected = brute_force_top_n(dict(enumerate(table.tolist())), set(excluded.tolist()), n)
            assert ranked.tolist() == expected

    def test_random_scorer_hits_at_the_chance_rate(self):
        rng = np.random.default_rng(7)
        candidates = np.arange(1000)
        hits = [
            hit(rank_candidates(rng.random(1000), candidates, 10), {int(rng.integers(1000))}) for _ in range(10_000)
        ]
        assert abs(hit_ratio(hits) - 0.01) <= 0.005

    def test_everything_excluded_gives_empty_list(self):
        ranked = recommend_top_n(lambda _u, items: np.zeros(len(items)), 0, 3, np.arange(3), 10)
        assert ranked.size == 0


class TestEvaluator:
    @pytest.fixture
    def evaluator(self) -> Evaluator:
        # Higher item index scores higher
        return Evaluator(lambda _u, items: items.astype(np.float64), n_items=10, user_ids=["a", "b", "c"], n=3)

    def test_per_user_metrics(self, evaluator):
        metrics = evaluator.evaluate_user(0, {8, 1}, excluded=np.array([9]))
        # Ranked: 8, 7, 6
        assert metrics.user_id == "a"
        assert metrics.recall == pytest.approx(0.5)
        assert metrics.precision == pytest.approx(1 / 3)
        assert metrics.ndcg == pytest.approx(1.0 / (1.0 + 1.0 / math.log2(3)))
        assert metrics.hit == 1

    def test_users_without_truth_are_skipped(self, evaluator):
        report = evaluator.evaluate({0: {9}, 1: set(), 2: {0}}, lambda _u: np.empty(0, dtype=np.int64))
        assert report.n_users == 2
        assert [m.user_id for m in report.users] == ["a", "c"]
        assert report.hit_ratio == pytest.approx(0.5)
        assert report.recall == pytest.approx(0.5)

    def test_average_report_of_nothing(self):
        report = average_report([], n=10)
        assert report.n_users == 0 and report.ndcg == 0.0

    def test_percent_rounding(self):
        report = average_report(
            [UserMetrics(user_id="a", n_truth=3, recall=1 / 3, precision=0.1, ndcg=0.123456, hit=1)], n=10
        )
        assert report.percent == {"recall": 33.333, "precision": 10.0, "ndcg": 12.346, "hit_ratio": 100.0}


class TestDatasetEvaluation:
    def test_thread_count_does_not_change_results(self, synthetic_bundle, small_settings):
        params = make_model_params(synthetic_bundle, small_settings)
        single = evaluate(params, synthetic_bundle, n=10, threads=1)
        pooled = evaluate(params, synthetic_bundle, n=10, threads=4)
        assert single.model_dump() == pooled.model_dump()
        assert single.n_users == sum(1 for items in synthetic_bundle.test_items_by_user.values() if items)

    def test_recommendations_never_contain_train_positives(self, synthetic_bundle, small_settings):
        params = make_model_params(synthetic_bundle, small_settings)
        evaluator = make_evaluator(params, synthetic_bundle, n=10)
        for user in range(5):
            positives = synthetic_bundle.positives_by_user[user]
            ranked = recommend_top_n(evaluator.scorer, user, synthetic_bundle.n_items, positives, 10)
            assert not set(ranked.tolist()) & set(positives.tolist())

    def test_validation_keeps_held_out_items_as_candidates(self, synthetic_bundle, small_settings):
        excluded = validation_exclusions(synthetic_bundle)
        for user, held in synthetic_bundle.validation_truth.items():
            assert not set(excluded(user).tolist()) & held

        params = make_model_params(synthetic_bundle, small_settings)
        report = evaluate_validation(make_evaluator(params, synthetic_bundle), synthetic_bundle)
        assert report.n_users == len(synthetic_bundle.validation_truth)

    def test_empty_test_set_raises(self, mocker):
        bundle = SimpleNamespace(test_items_by_user={0: set(), 1: set()})
        make = mocker.patch("src.services.evaluation.evaluator.make_evaluator")
        with pytest.raises(EmptyTestSetError):
            evaluate(mocker.Mock(), bundle)
        make.assert_not_called()


def bundle_with_repeat_purchase() -> DatasetBundle:
    """ann reviewed the lamp twice; one review fell in train and the other in test."""
    records = [
        record("ann", "lamp", ["light"]),
        record("ann", "lamp", ["glow"]),
        record("ann", "desk", ["wood"]),
        record("ben", "desk", ["wood"]),
        record("ben", "lamp", ["light"]),
        record("ben", "rug", ["wool"]),
    ]
    labels = [SplitLabel.TRAIN, SplitLabel.TEST, SplitLabel.TRAIN, SplitLabel.TRAIN, SplitLabel.TEST, SplitLabel.TEST]
    table = InteractionTable.from_records(records).model_copy(update={"split": labels})
    vocab = build_vocabulary(table)
    return DatasetBundle(table, vocab, build_aspect_sets(table, vocab), ValidationSet())


def oracle_evaluator(bundle: DatasetBundle) -> Evaluator:
    truth = bundle.test_items_by_user

    def scorer(user: int, items: np.ndarray) -> np.ndarray:
        return np.where(np.isin(items, sorted(truth[user])), np.inf, 0.0)

    return Evaluator(scorer, bundle.n_items, bundle.table.user_ids, n=10)


class TestRepeatPurchases:
    def test_test_items_stay_candidates(self):
        bundle = bundle_with_repeat_purchase()
        lamp, desk = bundle.item_id_to_index("lamp"), bundle.item_id_to_index("desk")

        assert bundle.positives_by_user[0].tolist() == sorted([lamp, desk])
        assert bundle.test_items_by_user[0] == {lamp}
        assert split_exclusions(bundle)(0).tolist() == [desk]

    def test_oracle_scorer_recalls_every_test_item(self, mocker):
        bundle = bundle_with_repeat_purchase()
        mocker.patch("src.services.evaluation.evaluator.make_evaluator", return_value=oracle_evaluator(bundle))

        report = evaluate(mocker.Mock(), bundle)

        assert report.n_users == 2
        assert report.recall == 1.0
        assert report.hit_ratio == 1.0
