import json
import os
import zlib

import numpy as np
import pytest

from iavkit import AnalysisBundle, ViTConfig, make_synthetic_bundle

TOY_CONFIG = ViTConfig(
    image_size=(16, 16, 1),
    patch_size=4,
    n_layers=2,
    n_heads=2,
    embed_dim=16,
    n_classes=4,
    rng_seed=11,
)


def random_probability_rows(rng, shape):
    """Random strictly positive rows normalized to sum exactly to 1."""
    raw = rng.random(shape) + 1e-3
    return raw / raw.sum(axis=-1, keepdims=True)


def crafted_bundle(n_samples=4, n_layers=2, n_heads=2, n_patches=16, seed=0,
                   with_images=False, image_side=16):
    """Hand-built valid bundle with random attention and attribution."""
    rng = np.random.default_rng(seed)
    attention = random_probability_rows(rng, (n_samples, n_layers, n_heads, n_patches))
    attribution = rng.random((n_samples, n_patches))
    labels = rng.integers(0, 4, size=n_samples, dtype=np.int64)
    images = rng.random((n_samples, image_side, image_side, 1)) if with_images else None
    grid = int(round(n_patches**0.5))
    return AnalysisBundle(
        attention=attention,
        attribution=attribution,
        labels=labels,
        predictions=labels.copy(),
        class_names=[f"class{k}" for k in range(4)],
        images=images,
        attribution_method="occlusion",
        checkpoint_tag="crafted",
        patch_size=image_side // grid if with_images else None,
    )


def rewrite_array(bundle_dir, name, arr):
    """Overwrite one bundle array on disk and patch its manifest entry."""
    path = os.path.join(bundle_dir, f"{name}.npy")
    np.save(path, arr)
    with open(path, "rb") as f:
        crc = zlib.crc32(f.read())
    manifest_path = os.path.join(bundle_dir, "manifest.json")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    manifest["files"][name] = {"path": f"{name}.npy", "shape": list(arr.shape), "crc32": crc}
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


@pytest.fixture(scope="session")
def toy_config():
    return TOY_CONFIG


@pytest.fixture(scope="session")
def synth_bundle_dir(tmp_path_factory):
    """One session-wide synthetic bundle generated by the toy ViT."""
    path = tmp_path_factory.mktemp("bundles") / "synth"
    make_synthetic_bundle(TOY_CONFIG, n_samples=16, seed=5, out_path=str(path))
    return str(path)
