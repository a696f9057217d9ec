import json
import os

import numpy as np
import pytest

from conftest import crafted_bundle, rewrite_array
from iavkit import load_bundle, save_bundle
from iavkit.errors import (
    ChecksumMismatchError,
    InvariantViolationError,
    IoFailureError,
    ManifestMissingError,
    ShapeMismatchError,
)


def test_round_trip_is_bit_exact(tmp_path):
    bundle = crafted_bundle(n_samples=4, with_images=True)
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    np.testing.assert_array_equal(loaded.attention, bundle.attention)
    np.testing.assert_array_equal(loaded.attribution, bundle.attribution)
    np.testing.assert_array_equal(loaded.labels, bundle.labels)
    np.testing.assert_array_equal(loaded.predictions, bundle.predictions)
    np.testing.assert_array_equal(loaded.images, bundle.images)
    assert loaded.class_names == bundle.class_names
    assert loaded.attribution_method == bundle.attribution_method
    assert loaded.checkpoint_tag == bundle.checkpoint_tag


def test_two_saves_identical_checksums(tmp_path):
    bundle = crafted_bundle()
    path_a, path_b = str(tmp_path / "a"), str(tmp_path / "b")
    save_bundle(bundle, path_a)
    save_bundle(bundle, path_b)
    with open(os.path.join(path_a, "manifest.json")) as f:
        manifest_a = json.load(f)
    with open(os.path.join(path_b, "manifest.json")) as f:
        manifest_b = json.load(f)
    assert manifest_a["files"] == manifest_b["files"]


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestMissingError):
        load_bundle(str(tmp_path))


def test_save_to_unwritable_path(tmp_path):
    blocker = tmp_path / "blocker.txt"
    blocker.write_text("not a directory")
    with pytest.raises(IoFailureError):
        save_bundle(crafted_bundle(), str(blocker / "bundle"))


def test_attention_row_sum_violation(tmp_path):
    bundle = crafted_bundle(n_samples=2)
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    bad = bundle.attention.copy() * 0.9
    rewrite_array(path, "attention", bad)
    with pytest.raises(InvariantViolationError):
        load_bundle(path)


def test_attention_within_tolerance_is_renormalized(tmp_path):
    bundle = crafted_bundle(n_samples=2)
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    # Push every row off by ~1e-6: inside tolerance, so load renormalizes.
    skewed = bundle.attention * (1.0 + 1e-6)
    rewrite_array(path, "attention", skewed)
    loaded = load_bundle(path)
    sums = loaded.attention.sum(axis=-1)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert loaded.load_report.renormalized_attention_rows == skewed[..., 0].size


def test_negative_attribution_clamped_and_counted(tmp_path):
    bundle = crafted_bundle(n_samples=2)
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    bad = bundle.attribution.copy()
    bad[0, :3] = -0.01
    rewrite_array(path, "attribution", bad)
    loaded = load_bundle(path)
    assert loaded.load_report.clamped_negative_attribution == 3
    assert np.all(loaded.attribution >= 0)
    np.testing.assert_array_equal(loaded.attribution[0, :3], [0.0, 0.0, 0.0])


def test_checksum_mismatch(tmp_path):
    bundle = crafted_bundle()
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    target = os.path.join(path, "labels.npy")
    with open(target, "r+b") as f:
        f.seek(-1, os.SEEK_END)
        last = f.read(1)
        f.seek(-1, os.SEEK_END)
        f.write(bytes([last[0] ^ 0xFF]))
    with pytest.raises(ChecksumMismatchError):
        load_bundle(path)


def test_declared_shape_mismatch(tmp_path):
    bundle = crafted_bundle()
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    manifest_path = os.path.join(path, "manifest.json")
    with open(manifest_path) as f:
        manifest = json.load(f)
    manifest["files"]["attention"]["shape"][0] += 1
    with open(manifest_path, "w") as f:
        json.dump(manifest, f)
    with pytest.raises(ShapeMismatchError):
        load_bundle(path)


def test_pixel_attribution_pooled_at_load(tmp_path):
    bundle = crafted_bundle(n_samples=3, n_patches=16, with_images=True, image_side=16)
    path = str(tmp_path / "b")
    save_bundle(bundle, path)
    rng = np.random.default_rng(9)
    pixel = rng.random((3, 16, 16))
    rewrite_array(path, "attribution", pixel)
    loaded = load_bundle(path)
    assert loaded.load_report.pooled_pixel_attribution
    assert loaded.attribution.shape == (3, 16)
    # Oracle: mean of each 4x4 block, patches row-major.
    blocks = pixel.reshape(3, 4, 4, 4, 4).mean(axis=(2, 4)).reshape(3, 16)
    np.testing.assert_allclose(loaded.attribution, blocks, atol=1e-12)


def test_synth_bundle_loads_cleanly(synth_bundle_dir):
    loaded = load_bundle(synth_bundle_dir)
    assert (loaded.n_samples, loaded.n_layers, loaded.n_heads, loaded.n_patches) == (16, 2, 2, 16)
    assert loaded.load_report.clamped_negative_attribution == 0
    assert loaded.load_report.renormalized_attention_rows == 0
