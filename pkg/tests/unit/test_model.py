import numpy as np
import pytest
from src.exceptions import CheckpointError, DegenerateNormError, UnknownEntityError
from src.schemas.corpus.models import PAD_INDEX
from src.schemas.model.models import MATRIX_NAMES
from src.services.model.checkpoint import (
    CHECKPOINT_MAGIC,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    validate_shapes,
)
from src.services.model.engine import AARMEngine, draw_dropout_masks, score
from src.services.model.factory import make_model_params
from src.services.model.ops import (
    aspect_attention,
    aspect_interaction,
    aspect_pool,
    global_interaction,
    masked_softmax,
    transform_normalize,
    user_attention,
    user_pool,
)
from src.services.variants.registry import VARIANT_ORDER

from tests.factories import make_aspect_sets, random_instance


class TestOps:
    def test_transform_normalize_gives_unit_rows_and_zero_pad(self):
        rng = np.random.default_rng(0)
        f = rng.normal(size=(5, 4))
        mask = np.array([True, True, False, True, True])
        c = transform_normalize(f, np.eye(4) + 0.1 * rng.normal(size=(4, 4)), mask)

        np.testing.assert_allclose(np.linalg.norm(c[mask], axis=1), 1.0, atol=1e-12)
        assert not c[2].any()

    def test_degenerate_norm_raises(self):
        f = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DegenerateNormError):
            transform_normalize(f, np.eye(2))

    def test_interaction_sum_is_cosine(self):
        a = np.array([0.6, 0.8])
        b = np.array([1.0, 0.0])
        assert aspect_interaction(a, b).sum() == pytest.approx(0.6)
        assert not aspect_interaction(a, b, True, False).any()

    def test_masked_softmax_excludes_masked_entries(self):
        logits = np.array([1.0, 2.0, 3.0])
        weights = masked_softmax(logits, np.array([True, False, True]))
        assert weights[1] == 0.0
        assert weights.sum() == pytest.approx(1.0)
        assert weights[2] / weights[0] == pytest.approx(np.exp(2.0))

    def test_masked_softmax_all_masked_row_is_zero(self):
        weights = masked_softmax(np.array([[0.5, -1.0]]), np.array([[False, False]]))
        assert not weights.any()

    def test_literal_softmax_keeps_every_position(self):
        weights = masked_softmax(np.zeros(4), np.array([True, True, False, False]), mode="literal")
        np.testing.assert_allclose(weights, 0.25)

    def test_aspect_attention_rows(self):
        rng = np.random.default_rng(1)
        c_user = rng.normal(size=(3, 4))
        c_item = rng.normal(size=(2, 4))
        user_mask = np.array([True, True, False])
        item_mask = np.array([True, True])
        c_user[2] = 0.0
        beta = aspect_attention(c_user, c_item, user_mask, item_mask, rng.normal(size=4))

        np.testing.assert_allclose(beta[:2].sum(axis=1), 1.0)
        assert not beta[2].any()

    def test_zero_att_weights_give_uniform_attention(self):
        rng = np.random.default_rng(2)
        c_user = rng.normal(size=(3, 4))
        c_item = rng.normal(size=(4, 4))
        user_mask = np.array([True, True, True])
        item_mask = np.array([True, True, True, False])

        beta = aspect_attention(c_user, c_item, user_mask, item_mask, np.zeros(4))
        alpha = user_attention(c_user, c_item, user_mask, item_mask, np.zeros(4))

        np.testing.assert_allclose(beta[:, :3], 1 / 3)
        assert not beta[:, 3].any()
        np.testing.assert_allclose(alpha, 1 / 3)

    def test_pools_match_engine_intermediates(self):
        params, sets = random_instance("aarm", seed=7)
        trace = AARMEngine(params, sets).trace(1, 2)
        h = aspect_pool(trace.c_user, trace.c_item, trace.beta, sets.user_mask[1])
        np.testing.assert_allclose(h, trace.h, atol=1e-12)
        np.testing.assert_allclose(user_pool(h, trace.alpha), trace.y_aspect, atol=1e-12)

    def test_global_interaction_rejects_unknown_user(self):
        with pytest.raises(UnknownEntityError, match="Unknown user index 5"):
            global_interaction(5, 0, np.ones((3, 2)), np.ones((3, 2)))


class TestEngine:
    @pytest.mark.parametrize("variant", VARIANT_ORDER)
    def test_batch_scores_match_single_pair_scores(self, variant):
        params, sets = random_instance(variant, seed=3)
        engine = AARMEngine(params, sets)
        users = np.array([0, 1, 2, 0])
        items = np.array([0, 3, 1, 2])

        batch = engine.forward(users, items).scores
        single = [score(int(u), int(v), params, sets)[0] for u, v in zip(users, items, strict=True)]

        np.testing.assert_allclose(batch, single, atol=1e-12)

    def test_score_items_matches_forward(self):
        params, sets = random_instance("aarm", seed=4)
        engine = AARMEngine(params, sets)
        scores = engine.score_items(1, chunk=3)
        np.testing.assert_allclose(scores, engine.forward(np.full(4, 1), np.arange(4)).scores, atol=1e-12)

    def test_unknown_item_raises(self):
        params, sets = random_instance("aarm", seed=0)
        with pytest.raises(UnknownEntityError):
            AARMEngine(params, sets).forward(np.array([0]), np.array([9]))

    def test_trace_exposes_attention(self):
        params, sets = random_instance("aarm", seed=5)
        _, trace = score(0, 0, params, sets)
        user_mask = sets.user_mask[0]
        assert trace.alpha.sum() == pytest.approx(1.0)
        assert not trace.alpha[~user_mask].any()
        np.testing.assert_allclose(trace.beta[user_mask].sum(axis=1), 1.0)
        assert trace.y_aspect.shape == (params.config.d_a,)
        assert trace.y_global.shape == (params.config.d_g,)

    def test_inference_mode_is_deterministic_and_training_mode_uses_dropout(self):
        params, sets = random_instance("aarm", seed=6, dropout=0.5)
        first, _ = score(1, 2, params, sets)
        second, _ = score(1, 2, params, sets)
        assert first == second

        rng = np.random.default_rng(0)
        dropped = {score(1, 2, params, sets, dropout_mode="training", rng=rng)[0] for _ in range(10)}
        assert len(dropped) > 1

    def test_dropout_masks_are_inverted(self):
        masks = draw_dropout_masks(np.random.default_rng(0), 200, 8, 8, 0.5)
        assert set(np.unique(masks.global_mask)) <= {0.0, 2.0}
        assert masks.aspect_mask.mean() == pytest.approx(1.0, abs=0.1)

    @pytest.mark.parametrize("variant", ["aarm", "a_inter", "no_aspect_att", "a_static", "no_user_att", "aspect_only"])
    def test_padding_does_not_change_scores(self, variant):
        for seed in range(50):
            params, sets = random_instance(variant, seed=seed)
            extra_u = 1 + seed % 10
            extra_v = 1 + (seed * 7) % 10
            padded = make_aspect_sets(sets.user_raw, sets.item_raw, m_u=sets.m_u + extra_u, m_v=sets.m_v + extra_v)
            original = make_aspect_sets(sets.user_raw, sets.item_raw, m_u=sets.m_u, m_v=sets.m_v)

            users, items = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
            base = AARMEngine(params, original).forward(users.ravel(), items.ravel()).scores
            wide = AARMEngine(params, padded).forward(users.ravel(), items.ravel()).scores
            np.testing.assert_allclose(wide, base, atol=1e-9)

    @pytest.mark.parametrize("variant", ["aarm", "a_inter", "no_aspect_att", "a_static", "no_user_att", "aspect_only"])
    def test_aspect_order_does_not_change_scores(self, variant):
        rng = np.random.default_rng(17)
        for seed in range(30):
            params, sets = random_instance(variant, seed=seed)
            shuffled = make_aspect_sets(
                [rng.permutation(row).tolist() for row in sets.user_raw],
                [rng.permutation(row).tolist() for row in sets.item_raw],
                m_u=sets.m_u,
                m_v=sets.m_v,
            )

            users, items = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
            base = AARMEngine(params, sets).forward(users.ravel(), items.ravel()).scores
            permuted = AARMEngine(params, shuffled).forward(users.ravel(), items.ravel()).scores
            np.testing.assert_allclose(permuted, base, atol=1e-9)

    @pytest.mark.parametrize("k", [0.25, 3.0, 40.0])
    def test_scaling_the_transform_changes_nothing(self, k):
        for seed in range(10):
            params, sets = random_instance("aarm", seed=seed)
            scaled = params.copy()
            scaled.matrices["W_trans"] *= k

            for user, item in [(0, 0), (1, 2), (2, 3)]:
                base_score, base = score(user, item, params, sets)
                scaled_score, trace = score(user, item, scaled, sets)
                np.testing.assert_allclose(trace.c_user, base.c_user, atol=1e-12)
                np.testing.assert_allclose(trace.c_item, base.c_item, atol=1e-12)
                assert scaled_score == pytest.approx(base_score, abs=1e-9)


class TestParams:
    def test_init_shapes_and_pad_row(self):
        params, _ = random_instance("aarm", n_users=3, n_items=4, n_aspects=7, d=4)
        assert params["W_A"].shape == (8, 4)
        assert not params["W_A"][PAD_INDEX].any()
        assert params["W_U"].shape == (3, 4)
        assert params["W_V"].shape == (4, 4)
        assert params["W_out"].shape == (8,)
        assert params.trainable_names() == list(MATRIX_NAMES)

    def test_global_only_freezes_aspect_matrices(self):
        params, _ = random_instance("global_only")
        assert params["W_out"].shape == (4,)
        assert params.trainable_names() == ["W_U", "W_V", "W_out"]

    def test_float32_mode(self):
        params, sets = random_instance("aarm")
        params32 = params.copy()
        params32.config = params.config.model_copy(update={"dtype": "float32"})
        params32.matrices = {name: array.astype(np.float32) for name, array in params.matrices.items()}

        scores64 = AARMEngine(params, sets).score_items(0)
        scores32 = AARMEngine(params32, sets).score_items(0)
        np.testing.assert_allclose(scores32, scores64, atol=1e-5)

    def test_factory_applies_strategy(self, synthetic_bundle, small_settings):
        params = make_model_params(synthetic_bundle, small_settings)
        assert params.config.strategy == "random_tune"
        assert params.trainable["W_A"] and not params.trainable["W_trans"]
        np.testing.assert_array_equal(params["W_trans"], np.eye(8))
        assert params.n_users == synthetic_bundle.n_users
        assert params.n_aspect_rows == synthetic_bundle.vocab.size


class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path):
        params, sets = random_instance("a_static", seed=8)
        path = save_checkpoint(tmp_path / "model.ckpt", params, extra={"adam.m.W_U": np.ones((3, 4))}, meta={"epoch": 3})

        assert path.read_bytes().startswith(CHECKPOINT_MAGIC)
        checkpoint = read_checkpoint(path)
        loaded = checkpoint.params

        assert loaded.config == params.config
        assert loaded.trainable == params.trainable
        assert loaded.fingerprint() == params.fingerprint()
        np.testing.assert_array_equal(checkpoint.extra["adam.m.W_U"], np.ones((3, 4)))
        assert checkpoint.meta == {"epoch": 3}
        np.testing.assert_array_equal(
            AARMEngine(loaded, sets).score_items(2), AARMEngine(params, sets).score_items(2)
        )

    def test_corruption_is_detected(self, tmp_path):
        params, _ = random_instance("aarm")
        path = save_checkpoint(tmp_path / "model.ckpt", params)
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            read_checkpoint(path)

    def test_wrong_magic_is_rejected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"NOT-A-CKPT\n")
        with pytest.raises(CheckpointError, match="not an AARM-CKPT v1 file"):
            read_checkpoint(path)

    def test_missing_file_is_rejected(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            read_checkpoint(tmp_path / "absent.ckpt")

    def test_shape_mismatch_with_dataset(self, tmp_path):
        params, _ = random_instance("aarm", n_users=3)
        path = save_checkpoint(tmp_path / "model.ckpt", params)
        other = make_aspect_sets([[1], [2], [3], [4]], [[1], [2], [3], [4]])
        with pytest.raises(CheckpointError, match="W_U"):
            load_checkpoint(path, aspect_sets=other)

    def test_validate_shapes_checks_aspect_rows(self):
        params, sets = random_instance("aarm", n_aspects=7)
        validate_shapes(params, sets, n_aspect_rows=8)
        with pytest.raises(CheckpointError, match="W_A"):
            validate_shapes(params, sets, n_aspect_rows=9)
