import numpy as np
import pytest
from src.exceptions import ConfigurationError, EmbeddingDimensionMismatch, UnknownVariantError
from src.services.model.engine import AARMEngine
from src.services.variants.forward import (
    forward_a_inter,
    forward_a_static,
    forward_aspect_only,
    forward_global_only,
    forward_no_aspect_att,
    forward_no_user_att,
    forward_variant,
)
from src.services.variants.registry import VARIANT_ORDER, get_variant, parse_variant_list
from src.services.variants.strategies import apply_embedding_strategy, requires_embeddings

from tests.factories import make_aspect_sets, random_instance


class TestRegistry:
    def test_all_variants_are_registered(self):
        assert VARIANT_ORDER == (
            "aarm",
            "a_inter",
            "no_aspect_att",
            "a_static",
            "no_user_att",
            "global_only",
            "aspect_only",
        )

    def test_unknown_variant_raises(self):
        with pytest.raises(UnknownVariantError, match="Unknown variant 'bogus'"):
            get_variant("bogus")

    def test_parse_variant_list(self):
        assert parse_variant_list("aarm, global_only,,a_static") == ["aarm", "global_only", "a_static"]
        with pytest.raises(UnknownVariantError):
            parse_variant_list("aarm,nope")

    @pytest.mark.parametrize(
        ("variant", "unused"),
        [
            ("aarm", set()),
            ("a_inter", {"w_att1"}),
            ("no_aspect_att", {"w_att1"}),
            ("no_user_att", {"w_att2"}),
            ("global_only", {"W_A", "W_trans", "w_att1", "w_att2"}),
            ("aspect_only", {"W_U", "W_V"}),
        ],
    )
    def test_unused_matrices(self, variant, unused):
        assert get_variant(variant).unused == unused

    def test_output_dim(self):
        assert get_variant("aarm").output_dim(8, 4) == 12
        assert get_variant("global_only").output_dim(8, 4) == 4
        assert get_variant("aspect_only").output_dim(8, 4) == 8


class TestStructure:
    def test_static_user_attention_ignores_the_item(self):
        for seed in range(10):
            params, sets = random_instance("a_static", seed=seed)
            alphas = [forward_variant("a_static", 1, item, params, sets).alpha for item in range(4)]
            for alpha in alphas[1:]:
                np.testing.assert_allclose(alpha, alphas[0], atol=1e-12)

    def test_a_inter_ignores_non_shared_item_aspects(self):
        for seed in range(10):
            params, sets = random_instance("a_inter", seed=seed)
            user_row = set(sets.user_raw[0])
            shared = sorted(user_row & set(sets.item_raw[0]))
            others = [a for a in range(7, 0, -1) if a not in user_row]
            replaced = shared + others[: sets.m_v - len(shared)]
            item_rows = [replaced] + [list(row) for row in sets.item_raw[1:]]
            altered = make_aspect_sets(sets.user_raw, item_rows, m_u=sets.m_u, m_v=sets.m_v)

            np.testing.assert_allclose(
                forward_a_inter(0, 0, params, altered),
                forward_a_inter(0, 0, params, sets),
                atol=1e-12,
            )

    def test_a_inter_attends_to_shared_aspects_only(self):
        params, sets = random_instance("a_inter", seed=3)
        trace = forward_variant("a_inter", 0, 0, params, sets)
        shared = np.isin(sets.user_indices[0], sets.item_raw[0]) & sets.user_mask[0]
        np.testing.assert_array_equal(trace.shared_mask, shared)
        assert not trace.alpha[~shared].any()
        assert trace.alpha.sum() == pytest.approx(1.0)

    def test_a_inter_keeps_one_interaction_per_shared_aspect(self):
        params, _ = random_instance("a_inter", seed=0, n_users=1, n_items=1, n_aspects=4, d=2)
        sets = make_aspect_sets([[1, 2, 3]], [[1, 2, 4]])
        params.matrices["W_A"][...] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]
        params.matrices["W_trans"][...] = np.eye(2)
        params.matrices["w_att2"][...] = 0.0

        trace = forward_variant("a_inter", 0, 0, params, sets)

        np.testing.assert_allclose(trace.h, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(trace.alpha, [0.5, 0.5, 0.0], atol=1e-12)
        np.testing.assert_allclose(trace.y_aspect, [0.5, 0.5], atol=1e-12)

    def test_zero_aspect_attention_weights_give_uniform_beta(self):
        params, sets = random_instance("aarm", seed=4)
        params.matrices["w_att1"][...] = 0.0
        trace = forward_variant("aarm", 2, 3, params, sets)
        item_mask = sets.item_mask[3]
        user_mask = sets.user_mask[2]
        np.testing.assert_allclose(trace.beta[np.ix_(user_mask, item_mask)], 1.0 / item_mask.sum())

    def test_zero_user_attention_weights_give_uniform_alpha(self):
        params, sets = random_instance("aarm", seed=5)
        params.matrices["w_att2"][...] = 0.0
        trace = forward_variant("aarm", 1, 2, params, sets)
        user_mask = sets.user_mask[1]
        np.testing.assert_allclose(trace.alpha[user_mask], 1.0 / user_mask.sum())

    def test_no_user_att_sums_what_uniform_attention_averages(self):
        for seed in range(10):
            params, sets = random_instance("aarm", seed=seed)
            params.matrices["w_att2"][...] = 0.0
            user, item = 1, 3
            averaged = forward_variant("aarm", user, item, params, sets).y_aspect
            summed = forward_no_user_att(user, item, params, sets)
            np.testing.assert_allclose(summed, sets.user_mask[user].sum() * averaged, atol=1e-12)

    def test_no_aspect_att_sums_item_aspects(self):
        params, sets = random_instance("aarm", seed=6)
        params.matrices["w_att2"][...] = 0.0
        trace = forward_variant("no_aspect_att", 0, 1, params, sets)
        pooled = trace.c_item[sets.item_mask[1]].sum(axis=0)
        expected_h = trace.c_user * pooled
        np.testing.assert_allclose(trace.h, expected_h, atol=1e-12)
        np.testing.assert_allclose(forward_no_aspect_att(0, 1, params, sets), trace.y_aspect)

    def test_a_static_forward_returns_aspect_vector(self):
        params, sets = random_instance("a_static", seed=7)
        assert forward_a_static(0, 0, params, sets).shape == (params.config.d_a,)

    def test_single_part_variants(self):
        params, sets = random_instance("aarm", seed=8)
        trace = forward_variant("aarm", 0, 0, params, sets)
        d = params.config.d_g
        global_part = float(trace.y_global @ params["W_out"][:d])
        aspect_part = float(trace.y_aspect @ params["W_out"][d:])

        assert trace.score == pytest.approx(global_part + aspect_part)
        global_params, _ = random_instance("global_only", seed=8)
        aspect_params, _ = random_instance("aspect_only", seed=8)
        assert forward_global_only(0, 0, global_params, sets) == pytest.approx(
            float((global_params["W_U"][0] * global_params["W_V"][0]) @ global_params["W_out"])
        )
        aspect_trace = forward_variant("aspect_only", 0, 0, aspect_params, sets)
        assert aspect_trace.y_global is None
        assert forward_aspect_only(0, 0, aspect_params, sets) == pytest.approx(
            float(aspect_trace.y_aspect @ aspect_params["W_out"])
        )

    @pytest.mark.parametrize("variant", VARIANT_ORDER)
    def test_engine_uses_the_configured_variant(self, variant):
        params, sets = random_instance(variant, seed=9)
        assert AARMEngine(params, sets).spec == get_variant(variant)


class TestStrategies:
    def test_pretrain_transform_freezes_embeddings(self):
        params, _ = random_instance("aarm", seed=1)
        pretrained = np.arange(params["W_A"].size, dtype=np.float64).reshape(params["W_A"].shape) + 1.0

        updated = apply_embedding_strategy(params, "pretrain_transform", pretrained)

        assert not updated.trainable["W_A"] and updated.trainable["W_trans"]
        assert not updated["W_A"][0].any()
        np.testing.assert_array_equal(updated["W_A"][1:], pretrained[1:])
        np.testing.assert_array_equal(updated["W_trans"], params["W_trans"])
        assert updated.config.strategy == "pretrain_transform"

    def test_pretrain_tune_fixes_identity_transform(self):
        params, _ = random_instance("aarm", seed=2)
        pretrained = np.ones(params["W_A"].shape)

        updated = apply_embedding_strategy(params, "pretrain_tune", pretrained)

        assert updated.trainable["W_A"] and not updated.trainable["W_trans"]
        np.testing.assert_array_equal(updated["W_trans"], np.eye(params.config.d_a))

    def test_random_tune_keeps_random_embeddings(self):
        params, _ = random_instance("aarm", seed=3)
        updated = apply_embedding_strategy(params, "random_tune")
        np.testing.assert_array_equal(updated["W_A"], params["W_A"])
        assert updated.trainable["W_A"] and not updated.trainable["W_trans"]

    def test_input_parameters_are_left_untouched(self):
        params, _ = random_instance("aarm", seed=4)
        before = params.fingerprint()
        apply_embedding_strategy(params, "pretrain_tune", np.ones(params["W_A"].shape))
        assert params.fingerprint() == before
        assert params.trainable["W_trans"]

    def test_global_only_needs_no_embeddings(self):
        params, _ = random_instance("global_only", seed=5)
        updated = apply_embedding_strategy(params, "pretrain_transform")
        assert updated.trainable_names() == ["W_U", "W_V", "W_out"]
        assert not requires_embeddings("pretrain_transform", "global_only")
        assert requires_embeddings("pretrain_tune", "aarm")
        assert not requires_embeddings("random_tune", "aarm")

    def test_missing_embeddings_raise(self):
        params, _ = random_instance("aarm")
        with pytest.raises(ConfigurationError, match="requires pre-trained"):
            apply_embedding_strategy(params, "pretrain_tune")

    def test_shape_mismatch_raises(self):
        params, _ = random_instance("aarm")
        with pytest.raises(EmbeddingDimensionMismatch):
            apply_embedding_strategy(params, "pretrain_tune", np.ones((3, 3)))

    def test_unknown_strategy_raises(self):
        params, _ = random_instance("aarm")
        with pytest.raises(ConfigurationError, match="Unknown embedding strategy"):
            apply_embedding_strategy(params, "frozen_random")
