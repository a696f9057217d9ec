import numpy as np
import pytest

from iavkit import AttributionMap, init_model, occlusion_attribution, validate_external_attribution
from iavkit.errors import ShapeMismatchError


def linear_scorer(weights, patch_size):
    """f_c(x) = sum_p w[c, p] * mean(patch p): analytic occlusion ground truth."""

    def scorer(image):
        w, h = image.shape[0], image.shape[1]
        nr, nc = w // patch_size, h // patch_size
        means = image.reshape(nr, patch_size, nc, patch_size, -1).mean(axis=(1, 3, 4))
        return weights @ means.ravel()

    return scorer


class TestOcclusion:
    def test_linear_surrogate_matches_analytic_formula(self):
        # With baseline 0, occluding patch p removes exactly w[c, p] * mean(patch p).
        rng = np.random.default_rng(0)
        for _ in range(20):
            weights = rng.normal(size=(3, 16))
            image = rng.random((16, 16, 1))
            scorer = linear_scorer(weights, 4)
            for class_index in range(3):
                amap = occlusion_attribution(
                    scorer, image, class_index, baseline_value=0.0, patch_size=4
                )
                means = image.reshape(4, 4, 4, 4, 1).mean(axis=(1, 3, 4)).ravel()
                expected = np.maximum(0.0, weights[class_index] * means)
                np.testing.assert_allclose(amap.values, expected, atol=1e-12)

    def test_matches_brute_force_on_toy_model(self, toy_config):
        model = init_model(toy_config)
        rng = np.random.default_rng(8)
        image = rng.random(toy_config.image_size)
        amap = occlusion_attribution(model, image, class_index=1, baseline_value=0.25)

        # Independent recomputation straight from the definition.
        from iavkit import forward

        base = forward(model, image).scores[1]
        ps = toy_config.patch_size
        for p in range(toy_config.n_patches):
            r, c = divmod(p, 4)
            occluded = image.copy()
            occluded[r * ps : (r + 1) * ps, c * ps : (c + 1) * ps, :] = 0.25
            drop = base - forward(model, occluded).scores[1]
            assert abs(amap.values[p] - max(0.0, drop)) <= 1e-12

    def test_constant_baseline_image_is_degenerate(self, toy_config):
        model = init_model(toy_config)
        image = np.full(toy_config.image_size, 0.5)
        amap = occlusion_attribution(model, image, class_index=0, baseline_value=0.5)
        assert amap.degenerate
        np.testing.assert_array_equal(amap.values, np.zeros(toy_config.n_patches))

    def test_non_negative_by_construction(self, toy_config):
        model = init_model(toy_config)
        rng = np.random.default_rng(12)
        for _ in range(5):
            amap = occlusion_attribution(model, rng.random(toy_config.image_size), 2)
            assert np.all(amap.values >= 0)

    def test_callable_requires_patch_size(self):
        with pytest.raises(ShapeMismatchError):
            occlusion_attribution(lambda img: np.zeros(2), np.zeros((4, 4, 1)), 0)

    def test_image_shape_checked(self, toy_config):
        model = init_model(toy_config)
        with pytest.raises(ShapeMismatchError):
            occlusion_attribution(model, np.zeros((4, 4, 1)), 0)


class TestValidateExternal:
    def test_pixel_map_pooled(self):
        pixel = np.arange(16.0).reshape(4, 4)
        amap = AttributionMap(values=pixel, class_index=0, method_tag="segmentation")
        out = validate_external_attribution(amap, expected_patch_count=4)
        expected = pixel.reshape(2, 2, 2, 2).mean(axis=(1, 3)).ravel()
        np.testing.assert_allclose(out.values, expected, atol=1e-15)
        assert out.method_tag == "segmentation"

    def test_patch_map_unchanged(self):
        values = np.array([0.1, 0.2, 0.3, 0.4])
        amap = AttributionMap(values=values, class_index=1)
        out = validate_external_attribution(amap, 4)
        np.testing.assert_array_equal(out.values, values)

    def test_mixed_signs_clamped_with_count(self):
        values = np.array([0.5, -0.1, 0.2, -0.3])
        amap = AttributionMap(values=values, class_index=0)
        out = validate_external_attribution(amap, 4)
        assert out.n_clamped == 2
        np.testing.assert_array_equal(out.values, [0.5, 0.0, 0.2, 0.0])

    def test_all_zero_passes_with_degenerate_flag(self):
        amap = AttributionMap(values=np.zeros(4), class_index=0)
        out = validate_external_attribution(amap, 4)
        assert out.degenerate

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        amap = AttributionMap(values=rng.normal(size=(8, 8)), class_index=0)
        once = validate_external_attribution(amap, 16)
        twice = validate_external_attribution(once, 16)
        np.testing.assert_array_equal(once.values, twice.values)
        assert once.degenerate == twice.degenerate

    def test_unmatchable_resolution(self):
        amap = AttributionMap(values=np.zeros(7), class_index=0)
        with pytest.raises(ShapeMismatchError):
            validate_external_attribution(amap, 16)
