import json

import numpy as np
import pytest
from src.config import Settings
from src.exceptions import NegativeSamplingError
from src.schemas.training.models import EpochLog, TrainHistory, ValidationMetrics
from src.services.model.checkpoint import read_checkpoint
from src.services.model.factory import make_model_params
from src.services.training.early_stopping import best_checkpoint, failing_streaks, should_stop
from src.services.training.factory import make_trainer
from src.services.training.optimizer import Adam, adam_step
from src.services.training.sampler import NegativeSampler, sample_negative
from src.services.training.trainer import BEST_CHECKPOINT, HISTORY_FILE, LAST_CHECKPOINT, TRAIN_LOG

from tests.factories import random_instance


def with_train(settings: Settings, **updates) -> Settings:
    return settings.model_copy(update={"train": settings.train.model_copy(update=updates)})


class TestSampler:
    def test_sample_negative_never_returns_a_positive(self):
        rng = np.random.default_rng(0)
        positives = np.array([0, 2, 3, 5])
        draws = {sample_negative(0, positives, 8, rng) for _ in range(200)}
        assert draws == {1, 4, 6, 7}

    def test_negatives_are_uniform_over_unpurchased_items(self):
        rng = np.random.default_rng(3)
        draws = np.array([sample_negative(0, np.array([0]), 3, rng) for _ in range(10_000)])
        assert not (draws == 0).any()
        assert np.mean(draws == 1) == pytest.approx(0.5, abs=0.02)
        assert np.mean(draws == 2) == pytest.approx(0.5, abs=0.02)

    def test_vectorized_negatives_are_uniform(self):
        sampler = NegativeSampler([np.array([0])], n_items=3)
        draws = sampler.sample(np.zeros(10_000, dtype=np.int64), np.random.default_rng(4))
        counts = np.bincount(draws, minlength=3)
        assert counts[0] == 0
        # Chi-squared statistic against 5000/5000, 1 degree of freedom, p = 0.001
        chi2 = float(((counts[1:] - 5000) ** 2 / 5000).sum())
        assert chi2 < 10.83

    def test_dense_user_uses_complement(self):
        rng = np.random.default_rng(1)
        positives = np.arange(9)
        assert {sample_negative(3, positives, 10, rng) for _ in range(20)} == {9}

    def test_saturated_user_raises(self):
        with pytest.raises(NegativeSamplingError, match="User 4"):
            sample_negative(4, np.arange(5), 5, np.random.default_rng(0))

    def test_vectorized_sampler_avoids_positives(self):
        positives = [np.array([0, 1, 2]), np.array([], dtype=np.int64), np.array([5])]
        sampler = NegativeSampler(positives, n_items=6)
        users = np.repeat(np.arange(3), 300)

        items = sampler.sample(users, np.random.default_rng(2))

        assert not sampler.is_positive(users, items).any()
        assert set(items[users == 0].tolist()) == {3, 4, 5}
        assert 5 not in items[users == 2]

    def test_vectorized_sampler_rejects_saturated_users(self):
        with pytest.raises(NegativeSamplingError):
            NegativeSampler([np.array([0, 1]), np.array([0])], n_items=2)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        params, _ = random_instance("global_only", seed=0)
        before = params["W_U"].copy()
        grads = {"W_U": np.full_like(before, 3.0), "W_V": np.zeros_like(params["W_V"])}

        Adam(lr=0.01).step(params, grads)

        np.testing.assert_allclose(params["W_U"], before - 0.01, atol=1e-9)

    def test_matches_reference_over_several_steps(self):
        params, _ = random_instance("global_only", seed=1)
        rng = np.random.default_rng(1)
        reference = params["W_out"].copy()
        m = np.zeros_like(reference)
        v = np.zeros_like(reference)
        optimizer = Adam(lr=0.003)

        for t in range(1, 6):
            g = rng.normal(size=reference.shape)
            optimizer = adam_step(params, {"W_out": g}, optimizer)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            m_hat = m / (1 - 0.9**t)
            v_hat = v / (1 - 0.999**t)
            reference = reference - 0.003 * m_hat / (np.sqrt(v_hat) + 1e-8)

        np.testing.assert_allclose(params["W_out"], reference, rtol=1e-10, atol=1e-12)
        assert optimizer.t == 5

    def test_frozen_matrices_are_not_updated(self):
        params, _ = random_instance("aarm", seed=2)
        params.trainable["W_A"] = False
        before = params["W_A"].copy()
        Adam().step(params, {"W_A": np.ones_like(before)})
        np.testing.assert_array_equal(params["W_A"], before)

    def test_state_round_trip(self):
        params, _ = random_instance("global_only", seed=3)
        optimizer = Adam()
        optimizer.step(params, {"W_U": np.ones_like(params["W_U"])})

        restored = Adam()
        restored.load_state(optimizer.state_arrays(), optimizer.t)

        assert set(optimizer.state_arrays()) == {"adam.m.W_U", "adam.v.W_U"}
        np.testing.assert_array_equal(restored.m["W_U"], optimizer.m["W_U"])
        assert restored.t == 1


def checkpoints(*rows: tuple[float, float, float, float]) -> list[ValidationMetrics]:
    return [
        ValidationMetrics(epoch=10 * (k + 1), recall=r, precision=p, ndcg=n, hit_ratio=h)
        for k, (r, p, n, h) in enumerate(rows)
    ]


class TestEarlyStopping:
    def test_streaks_reset_on_improvement(self):
        history = checkpoints((0.1, 0.1, 0.1, 0.1), (0.2, 0.1, 0.1, 0.1), (0.2, 0.2, 0.05, 0.1))
        assert failing_streaks(history) == {"recall": 1, "precision": 0, "ndcg": 2, "hit_ratio": 2}

    def test_stops_when_two_measures_stall(self):
        history = checkpoints(
            (0.3, 0.3, 0.3, 0.3),
            (0.4, 0.2, 0.2, 0.4),
            (0.5, 0.2, 0.2, 0.5),
            (0.6, 0.2, 0.2, 0.6),
            (0.7, 0.2, 0.2, 0.7),
        )
        assert should_stop(history, patience=4, min_failing=2)

    def test_single_stalled_measure_keeps_going(self):
        history = checkpoints(*[(0.1 * k, 0.1 * k, 0.1 * k, 0.3) for k in range(1, 7)])
        assert not should_stop(history, patience=4, min_failing=2)

    def test_best_checkpoint_prefers_earliest_maximum(self):
        history = checkpoints((0.1, 0.1, 0.2, 0.1), (0.1, 0.1, 0.4, 0.1), (0.1, 0.1, 0.4, 0.1))
        best = best_checkpoint(history)
        assert best is not None and best.epoch == 20
        assert best_checkpoint([]) is None


class TestTrainer:
    def test_short_run_writes_checkpoints_and_logs(self, synthetic_bundle, small_settings, tmp_path):
        params = make_model_params(synthetic_bundle, small_settings)
        trainer = make_trainer(synthetic_bundle, params, small_settings, out_dir=tmp_path)

        best, history = trainer.train()

        assert len(history.losses) == 4
        assert all(np.isfinite(history.losses))
        assert [c.epoch for c in history.checkpoints] == [2, 4]
        assert history.best_epoch in (2, 4)
        for name in (BEST_CHECKPOINT, LAST_CHECKPOINT, TRAIN_LOG, HISTORY_FILE):
            assert (tmp_path / name).exists(), name

        lines = (tmp_path / TRAIN_LOG).read_text(encoding="utf-8").splitlines()
        entries = [EpochLog.model_validate_json(line) for line in lines]
        assert [e.epoch for e in entries] == [1, 2, 3, 4]
        assert entries[1].checkpoint is not None and entries[0].checkpoint is None

        saved = read_checkpoint(tmp_path / BEST_CHECKPOINT)
        assert saved.params.fingerprint() == best.fingerprint()
        assert saved.meta["epoch"] == history.best_epoch
        assert TrainHistory.model_validate(json.loads((tmp_path / HISTORY_FILE).read_text())) == history

    def test_loss_decreases(self, synthetic_bundle, small_settings):
        settings = with_train(small_settings, max_epochs=6, eval_every=100)
        params = make_model_params(synthetic_bundle, settings)
        _, history = make_trainer(synthetic_bundle, params, settings).train()
        assert history.losses[-1] < history.losses[0]
        assert history.checkpoints == []
        assert history.best_epoch == 6

    def test_resume_matches_uninterrupted_run(self, synthetic_bundle, small_settings, tmp_path):
        full_params = make_model_params(synthetic_bundle, small_settings)
        full_best, full_history = make_trainer(synthetic_bundle, full_params, small_settings, tmp_path / "full").train()

        short = with_train(small_settings, max_epochs=2)
        first = make_model_params(synthetic_bundle, short)
        make_trainer(synthetic_bundle, first, short, tmp_path / "split").train()

        second = make_model_params(synthetic_bundle, small_settings)
        resumed_best, resumed_history = make_trainer(synthetic_bundle, second, small_settings, tmp_path / "split").train(
            resume=True
        )

        assert resumed_history.losses == full_history.losses
        assert resumed_best.fingerprint() == full_best.fingerprint()
        assert second.fingerprint() == full_params.fingerprint()
        lines = (tmp_path / "split" / TRAIN_LOG).read_text(encoding="utf-8").splitlines()
        assert [EpochLog.model_validate_json(line).epoch for line in lines] == [1, 2, 3, 4]

    def test_resume_without_checkpoint_starts_fresh(self, synthetic_bundle, small_settings, tmp_path):
        settings = with_train(small_settings, max_epochs=2)
        params = make_model_params(synthetic_bundle, settings)
        trainer = make_trainer(synthetic_bundle, params, settings, tmp_path)
        _, history = trainer.train(resume=True)
        assert history.stopped_epoch == 2
