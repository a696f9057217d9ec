import numpy as np
import pytest

from iavkit import (
    ViTConfig,
    extract_cls_attention,
    forward,
    init_model,
    load_model,
    save_model,
)
from iavkit.errors import DegenerateRowError, InvalidConfigError, ShapeMismatchError
from iavkit.vit import patchify


@pytest.fixture(scope="module")
def model(toy_config):
    return init_model(toy_config)


@pytest.fixture(scope="module")
def image(toy_config):
    rng = np.random.default_rng(42)
    return rng.random(toy_config.image_size)


class TestConfigAndInit:
    def test_embed_dim_divisibility(self):
        with pytest.raises(InvalidConfigError):
            ViTConfig(embed_dim=6, n_heads=4)

    def test_patch_divisibility(self):
        with pytest.raises(InvalidConfigError):
            ViTConfig(image_size=(15, 16, 1), patch_size=4)

    def test_same_seed_identical(self, toy_config):
        a = init_model(toy_config)
        b = init_model(toy_config)
        assert a.params.keys() == b.params.keys()
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_different_seed_differs(self, toy_config):
        import dataclasses

        other = dataclasses.replace(toy_config, rng_seed=toy_config.rng_seed + 1)
        a, b = init_model(toy_config), init_model(other)
        assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_params_in_init_range(self, model):
        for arr in model.params.values():
            assert np.all(np.abs(arr) <= 0.05)


class TestForward:
    def test_attention_rows_are_probability_vectors(self, model, image):
        result = forward(model, image)
        assert np.all(result.attention >= 0)
        np.testing.assert_allclose(result.attention.sum(axis=-1), 1.0, atol=1e-9)

    def test_deterministic(self, model, image):
        a = forward(model, image)
        b = forward(model, image)
        np.testing.assert_array_equal(a.scores, b.scores)
        np.testing.assert_array_equal(a.attention, b.attention)

    def test_zero_vs_onehot_image_scores_differ(self, model, toy_config):
        zero = np.zeros(toy_config.image_size)
        onehot = zero.copy()
        onehot[3, 5, 0] = 1.0
        assert not np.array_equal(forward(model, zero).scores, forward(model, onehot).scores)

    def test_shape_mismatch(self, model):
        with pytest.raises(ShapeMismatchError):
            forward(model, np.zeros((8, 8, 1)))

    def test_output_shapes(self, model, image, toy_config):
        result = forward(model, image)
        p = toy_config.n_patches
        assert result.scores.shape == (toy_config.n_classes,)
        assert result.attention.shape == (toy_config.n_layers, toy_config.n_heads, p + 1, p + 1)


class TestExtractClsAttention:
    def test_drop_and_renormalize(self):
        att = np.array([0.2, 0.4, 0.4]).reshape(1, 1, 1, 3)
        att = np.broadcast_to(att, (1, 1, 3, 3)).copy()
        out = extract_cls_attention(att)
        np.testing.assert_allclose(out[0, 0], [0.5, 0.5], atol=1e-15)

    def test_already_excludes_cls(self):
        att = np.zeros((1, 1, 3, 3))
        att[0, 0, :, :] = [0.0, 1.0, 0.0]
        out = extract_cls_attention(att)
        np.testing.assert_array_equal(out[0, 0], [1.0, 0.0])

    def test_degenerate_row(self):
        att = np.zeros((1, 1, 3, 3))
        att[0, 0, :, :] = [1.0, 0.0, 0.0]
        with pytest.raises(DegenerateRowError):
            extract_cls_attention(att)

    def test_keep_cls_flag(self):
        att = np.zeros((1, 1, 3, 3))
        att[0, 0, 0, :] = [0.2, 0.4, 0.4]
        out = extract_cls_attention(att, keep_cls=True)
        np.testing.assert_array_equal(out[0, 0], [0.2, 0.4, 0.4])

    def test_rows_probability_vectors(self, model, image):
        out = extract_cls_attention(forward(model, image).attention)
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


def test_patchify_row_major(toy_config):
    # Paint each 4x4 patch with its row-major index; patch p must contain p.
    img = np.zeros(toy_config.image_size)
    ps = toy_config.patch_size
    for p in range(toy_config.n_patches):
        r, c = divmod(p, 4)
        img[r * ps : (r + 1) * ps, c * ps : (c + 1) * ps, 0] = p
    patches = patchify(img, ps)
    np.testing.assert_array_equal(patches.mean(axis=1), np.arange(16.0))


def test_permutation_consistency_without_position_embeddings(toy_config):
    model = init_model(toy_config)
    model.params["pos_embed"] = np.zeros_like(model.params["pos_embed"])
    rng = np.random.default_rng(3)
    image = rng.random(toy_config.image_size)
    perm = rng.permutation(toy_config.n_patches)

    ps = toy_config.patch_size
    permuted = np.empty_like(image)
    for q in range(toy_config.n_patches):
        rq, cq = divmod(q, 4)
        rs, cs = divmod(int(perm[q]), 4)
        permuted[rq * ps : (rq + 1) * ps, cq * ps : (cq + 1) * ps] = image[
            rs * ps : (rs + 1) * ps, cs * ps : (cs + 1) * ps
        ]

    base = extract_cls_attention(forward(model, image).attention)
    shuffled = extract_cls_attention(forward(model, permuted).attention)
    np.testing.assert_allclose(shuffled, base[:, :, perm], atol=1e-12)


def test_model_save_load_round_trip(tmp_path, toy_config):
    model = init_model(toy_config)
    path = str(tmp_path / "model")
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == toy_config
    for name in model.params:
        np.testing.assert_array_equal(loaded.params[name], model.params[name])
    img = np.random.default_rng(1).random(toy_config.image_size)
    np.testing.assert_array_equal(forward(model, img).scores, forward(loaded, img).scores)
