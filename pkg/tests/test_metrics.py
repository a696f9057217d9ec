import math

import numpy as np
import pytest

from conftest import crafted_bundle, random_probability_rows
from iavkit import (
    AnalysisBundle,
    AttributionMap,
    aav,
    attention_entropy,
    checkpoint_diff,
    classify_heads,
    entropy_profile,
    global_iav,
    ia_score,
    iav,
)
from iavkit.errors import (
    EmptyBundleError,
    IndexOutOfRangeError,
    NotAProbabilityVectorError,
    SampleOrderMismatchError,
    ShapeMismatchError,
)


def cosine_oracle(a, b):
    """Scalar-loop cosine, independent of any numpy reduction path."""
    dot = sa = sb = 0.0
    for x, y in zip(a, b):
        dot += float(x) * float(y)
        sa += float(x) * float(x)
        sb += float(y) * float(y)
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return dot / (math.sqrt(sa) * math.sqrt(sb))


def attention_row_for_score(target, n_patches):
    """Probability row [a, 1-a, 0...] whose cosine with e1 equals `target`."""
    a = target / (target + math.sqrt(1.0 - target * target))
    row = np.zeros(n_patches)
    row[0], row[1] = a, 1.0 - a
    return row


class TestIaScore:
    def test_identity_gives_one(self):
        v = np.array([0.1, 0.4, 0.3, 0.2])
        assert ia_score(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_support_gives_zero(self):
        assert ia_score([1, 0, 0, 0], [0, 1 / 3, 1 / 3, 1 / 3]) == 0.0

    def test_hand_value(self):
        # dot = 0.5; norms sqrt(2) * sqrt(0.5) = 1.
        assert ia_score([1, 1, 0, 0], [0.5, 0, 0.5, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_degenerate_attribution_scores_zero(self):
        assert ia_score(np.zeros(4), [0.25, 0.25, 0.25, 0.25]) == 0.0

    def test_accepts_attribution_map(self):
        amap = AttributionMap(values=np.array([1.0, 0.0]), class_index=0)
        assert ia_score(amap, np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ia_score([1, 2], [1, 2, 3])

    def test_against_scalar_oracle_and_scale_invariance(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            attr = rng.random(16)
            att = random_probability_rows(rng, (16,))
            got = ia_score(attr, att)
            assert 0.0 <= got <= 1.0
            assert abs(got - cosine_oracle(attr, att)) <= 1e-12
            scale = float(rng.uniform(0.01, 100.0))
            assert abs(ia_score(scale * attr, att) - got) <= 1e-12


class TestIav:
    def test_length_and_ordering(self):
        bundle = crafted_bundle(n_samples=2, n_layers=3, n_heads=4)
        vec = iav(bundle, 0, 0)
        assert vec.scores.shape == (12,)
        # Entry l*H + h must equal the direct per-head score.
        for layer in range(3):
            for head in range(4):
                expected = ia_score(bundle.attribution[0], bundle.attention[0, layer, head])
                assert vec.scores[layer * 4 + head] == pytest.approx(expected, abs=1e-15)

    def test_all_ones_when_attribution_equals_attention(self):
        n, p = 3, 8
        rng = np.random.default_rng(0)
        shared = random_probability_rows(rng, (n, p))
        attention = np.broadcast_to(shared[:, None, None, :], (n, 2, 2, p)).copy()
        bundle = AnalysisBundle(
            attention=attention,
            attribution=shared.copy(),
            labels=np.zeros(n, dtype=np.int64),
            predictions=np.zeros(n, dtype=np.int64),
            class_names=["only"],
        )
        for i in range(n):
            np.testing.assert_allclose(iav(bundle, i, 0).scores, 1.0, atol=1e-9)

    def test_full_scale_head_grid_gives_144_entries(self):
        # The full-size model layout: 12 layers x 12 heads.
        bundle = crafted_bundle(n_samples=1, n_layers=12, n_heads=12, n_patches=4)
        assert iav(bundle, 0, 0).scores.shape == (144,)

    def test_brute_force_oracle(self):
        bundle = crafted_bundle(n_samples=4, n_layers=2, n_heads=2, seed=21)
        for i in range(4):
            vec = iav(bundle, i, int(bundle.predictions[i]))
            for layer in range(2):
                for head in range(2):
                    oracle = cosine_oracle(
                        bundle.attribution[i], bundle.attention[i, layer, head]
                    )
                    assert abs(vec.scores[layer * 2 + head] - oracle) <= 1e-12

    def test_degenerate_heads_flagged(self):
        bundle = crafted_bundle(n_samples=1)
        bundle.attribution[0] = 0.0
        vec = iav(bundle, 0, 0)
        np.testing.assert_array_equal(vec.scores, np.zeros(4))
        assert vec.degenerate_heads == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_index_out_of_range(self):
        bundle = crafted_bundle(n_samples=2)
        with pytest.raises(IndexOutOfRangeError):
            iav(bundle, 2, 0)
        with pytest.raises(IndexOutOfRangeError):
            iav(bundle, 0, 99)


class TestGlobalIav:
    def test_single_sample_equals_its_iav(self):
        bundle = crafted_bundle(n_samples=1)
        single = iav(bundle, 0, int(bundle.predictions[0]))
        result = global_iav(bundle)
        np.testing.assert_array_equal(result.scores, single.scores)

    def test_mean_of_two_samples(self):
        bundle = crafted_bundle(n_samples=2, n_layers=1, n_heads=2, n_patches=2)
        bundle.attention[0, 0, 0] = [1.0, 0.0]
        bundle.attention[0, 0, 1] = [0.0, 1.0]
        bundle.attention[1, 0, 0] = [0.0, 1.0]
        bundle.attention[1, 0, 1] = [1.0, 0.0]
        bundle.attribution[0] = [1.0, 0.0]
        bundle.attribution[1] = [1.0, 0.0]
        result = global_iav(bundle)
        np.testing.assert_allclose(result.scores, [0.5, 0.5], atol=1e-15)

    def test_oracle_mean(self):
        bundle = crafted_bundle(n_samples=16, seed=33)
        result = global_iav(bundle, "predicted")
        oracle = np.zeros(4)
        for i in range(16):
            for layer in range(2):
                for head in range(2):
                    oracle[layer * 2 + head] += cosine_oracle(
                        bundle.attribution[i], bundle.attention[i, layer, head]
                    )
        np.testing.assert_allclose(result.scores, oracle / 16, atol=1e-12)

    def test_permutation_invariance(self):
        bundle = crafted_bundle(n_samples=8, seed=2)
        perm = np.random.default_rng(0).permutation(8)
        shuffled = AnalysisBundle(
            attention=bundle.attention[perm],
            attribution=bundle.attribution[perm],
            labels=bundle.labels[perm],
            predictions=bundle.predictions[perm],
            class_names=bundle.class_names,
        )
        np.testing.assert_allclose(
            global_iav(bundle).scores, global_iav(shuffled).scores, atol=1e-12
        )

    def test_label_modes(self):
        bundle = crafted_bundle(n_samples=4)
        bundle.predictions[:] = (bundle.labels + 1) % 4
        predicted = global_iav(bundle, "predicted")
        ground = global_iav(bundle, "ground_truth")
        assert predicted.label_mode == "predicted"
        assert ground.label_mode == "ground_truth"
        # Attribution is fixed per sample, so scores agree; only metadata differs.
        np.testing.assert_array_equal(predicted.scores, ground.scores)

    def test_empty_bundle(self):
        bundle = crafted_bundle(n_samples=1)
        empty = AnalysisBundle(
            attention=bundle.attention[:0],
            attribution=bundle.attribution[:0],
            labels=bundle.labels[:0],
            predictions=bundle.predictions[:0],
            class_names=bundle.class_names,
        )
        with pytest.raises(EmptyBundleError):
            global_iav(empty)


class TestAav:
    def test_own_attribution_reduces_to_global_iav(self):
        bundle = crafted_bundle(n_samples=6, seed=4)
        via_aav = aav(bundle, bundle.attribution.copy())
        direct = global_iav(bundle)
        np.testing.assert_array_equal(via_aav.scores, direct.scores)

    def test_uniform_baseline_lower_bound(self):
        # cos(uniform, a) = 1 / (sqrt(P) * ||a||) >= 1/sqrt(P) for prob vectors.
        bundle = crafted_bundle(n_samples=8, n_patches=16, seed=7)
        result = aav(bundle, np.full(16, 1.0 / 16))
        assert np.all(result.scores >= 1.0 / math.sqrt(16) - 1e-12)

    def test_per_sample_baselines_match_oracle(self):
        bundle = crafted_bundle(n_samples=5, seed=10)
        rng = np.random.default_rng(11)
        masks = (rng.random((5, 16)) > 0.5).astype(np.float64)
        masks[masks.sum(axis=1) == 0] = 1.0
        result = aav(bundle, masks, baseline_tag="segmentation")
        oracle = np.zeros(4)
        for i in range(5):
            for layer in range(2):
                for head in range(2):
                    oracle[layer * 2 + head] += cosine_oracle(
                        masks[i], bundle.attention[i, layer, head]
                    )
        np.testing.assert_allclose(result.scores, oracle / 5, atol=1e-12)
        assert result.baseline_tag == "segmentation"

    def test_pixel_level_shared_baseline(self):
        bundle = crafted_bundle(n_samples=3, n_patches=16)
        pixel = np.random.default_rng(1).random((16, 16))
        result = aav(bundle, pixel)
        pooled = pixel.reshape(4, 4, 4, 4).mean(axis=(1, 3)).ravel()
        oracle = aav(bundle, pooled)
        np.testing.assert_allclose(result.scores, oracle.scores, atol=1e-12)

    def test_wrong_baseline_shape(self):
        bundle = crafted_bundle(n_samples=3)
        with pytest.raises(ShapeMismatchError):
            aav(bundle, np.zeros(7))


class TestAttentionEntropy:
    def test_one_hot_is_exactly_zero(self):
        assert attention_entropy([1.0, 0.0, 0.0, 0.0]) == 0.0

    def test_uniform_is_ln_p(self):
        p = 196
        assert attention_entropy(np.full(p, 1.0 / p)) == pytest.approx(math.log(p), abs=1e-9)
        assert attention_entropy(np.full(p, 1.0 / p)) == pytest.approx(5.2781, abs=1e-4)

    def test_half_half(self):
        assert attention_entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_bounds_on_random_vectors(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            p = int(rng.integers(2, 64))
            row = random_probability_rows(rng, (p,))
            h = attention_entropy(row)
            assert 0.0 <= h <= math.log(p) + 1e-12

    def test_rejects_non_probability(self):
        with pytest.raises(NotAProbabilityVectorError):
            attention_entropy([0.5, 0.6])
        with pytest.raises(NotAProbabilityVectorError):
            attention_entropy([-0.1, 1.1])


class TestEntropyProfile:
    def test_uniform_bundle(self):
        bundle = crafted_bundle(n_samples=3, n_patches=8)
        bundle.attention[:] = 1.0 / 8
        profile = entropy_profile(bundle)
        np.testing.assert_allclose(profile.mean, math.log(8), atol=1e-12)
        np.testing.assert_allclose(profile.vmin, profile.vmax, atol=1e-12)

    def test_one_hot_bundle(self):
        bundle = crafted_bundle(n_samples=3, n_patches=8)
        bundle.attention[:] = 0.0
        bundle.attention[..., 2] = 1.0
        profile = entropy_profile(bundle)
        np.testing.assert_array_equal(profile.mean, np.zeros((2, 2)))

    def test_matches_scalar_oracle(self):
        bundle = crafted_bundle(n_samples=6, seed=17)
        profile = entropy_profile(bundle)
        for layer in range(2):
            for head in range(2):
                per_sample = [
                    -sum(p * math.log(p) for p in bundle.attention[i, layer, head] if p > 0)
                    for i in range(6)
                ]
                assert abs(profile.mean[layer, head] - np.mean(per_sample)) <= 1e-12
                assert abs(profile.median[layer, head] - np.median(per_sample)) <= 1e-12
                assert profile.vmin[layer, head] == pytest.approx(min(per_sample), abs=1e-12)
                assert profile.vmax[layer, head] == pytest.approx(max(per_sample), abs=1e-12)


class TestClassifyHeads:
    def build_bundle_with_medians(self, medians, n_samples=3):
        """One layer, one head per target median; three samples at m-0.1, m, m+0.1."""
        n_heads = len(medians)
        p = 8
        attention = np.zeros((n_samples, 1, n_heads, p))
        for h, median in enumerate(medians):
            targets = [median - 0.1, median, median + 0.1]
            for i, t in enumerate(targets):
                attention[i, 0, h] = attention_row_for_score(t, p)
        attribution = np.zeros((n_samples, p))
        attribution[:, 0] = 1.0
        return AnalysisBundle(
            attention=attention,
            attribution=attribution,
            labels=np.zeros(n_samples, dtype=np.int64),
            predictions=np.zeros(n_samples, dtype=np.int64),
            class_names=["only"],
        )

    def test_designed_medians_and_tie_policy(self):
        bundle = self.build_bundle_with_medians([0.2, 0.5, 0.8])
        profiles = classify_heads(bundle)
        assert [p.head_type for p in profiles] == ["low", "high", "high"]
        assert profiles[0].median == pytest.approx(0.2, abs=1e-12)
        assert profiles[1].median == pytest.approx(0.5, abs=1e-12)
        assert profiles[2].median == pytest.approx(0.8, abs=1e-12)

    def test_high_and_low_examples(self):
        high = self.build_bundle_with_medians([0.8])
        assert classify_heads(high)[0].head_type == "high"
        low = self.build_bundle_with_medians([0.2])
        assert classify_heads(low)[0].head_type == "low"

    def test_partition_and_quartile_order(self):
        bundle = crafted_bundle(n_samples=12, n_layers=3, n_heads=2, seed=9)
        profiles = classify_heads(bundle)
        assert len(profiles) == 6
        assert all(p.head_type in ("high", "low") for p in profiles)
        for p in profiles:
            assert p.vmin <= p.q1 <= p.median <= p.q3 <= p.vmax

    def test_empty_bundle(self):
        bundle = crafted_bundle(n_samples=1)
        empty = AnalysisBundle(
            attention=bundle.attention[:0],
            attribution=bundle.attribution[:0],
            labels=bundle.labels[:0],
            predictions=bundle.predictions[:0],
            class_names=bundle.class_names,
        )
        with pytest.raises(EmptyBundleError):
            classify_heads(empty)


class TestCheckpointDiff:
    def test_identical_bundles_give_zero(self):
        bundle = crafted_bundle(n_samples=4, seed=1)
        assert checkpoint_diff(bundle, bundle, "attribution") == 0.0
        assert checkpoint_diff(bundle, bundle, "attention") == 0.0

    def test_disjoint_support_gives_sqrt_two(self):
        a = crafted_bundle(n_samples=2, n_patches=4, seed=0)
        b = crafted_bundle(n_samples=2, n_patches=4, seed=0)
        a.attribution[:] = [[1, 0, 0, 0], [1, 0, 0, 0]]
        b.attribution[:] = [[0, 1, 0, 0], [0, 1, 0, 0]]
        assert checkpoint_diff(a, b, "attribution") == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_matches_scalar_oracle(self):
        a = crafted_bundle(n_samples=5, seed=3)
        b = crafted_bundle(n_samples=5, seed=3)
        rng = np.random.default_rng(55)
        b.attention = random_probability_rows(rng, b.attention.shape)
        b.attribution = rng.random(b.attribution.shape)

        def unit(v):
            n = math.sqrt(sum(float(x) * float(x) for x in v))
            return [float(x) / n for x in v] if n > 0 else [0.0] * len(v)

        def dist(u, v):
            return math.sqrt(sum((x - y) ** 2 for x, y in zip(unit(u), unit(v))))

        oracle_attr = np.mean([dist(a.attribution[i], b.attribution[i]) for i in range(5)])
        assert abs(checkpoint_diff(a, b, "attribution") - oracle_attr) <= 1e-12

        oracle_att = np.mean(
            [
                np.mean(
                    [
                        dist(a.attention[i, l, h], b.attention[i, l, h])
                        for l in range(2)
                        for h in range(2)
                    ]
                )
                for i in range(5)
            ]
        )
        assert abs(checkpoint_diff(a, b, "attention") - oracle_att) <= 1e-12

    def test_sample_order_mismatch(self):
        a = crafted_bundle(n_samples=4, seed=1)
        b = crafted_bundle(n_samples=4, seed=1)
        b.labels = b.labels[::-1].copy()
        if np.array_equal(a.labels, b.labels):
            b.labels[0] = (b.labels[0] + 1) % 4
        with pytest.raises(SampleOrderMismatchError):
            checkpoint_diff(a, b, "attribution")

    def test_dim_mismatch(self):
        a = crafted_bundle(n_samples=2)
        b = crafted_bundle(n_samples=3)
        with pytest.raises(ShapeMismatchError):
            checkpoint_diff(a, b, "attention")
