"""Forward-only miniature vision transformer.

Produces real softmax attention maps and class scores at desk scale so the
analyses can run end-to-end without any external model or training. The
encoder is the pre-norm variant used by modern ViT implementations:

    per layer:  x += MSA(LN(x));  x += MLP(LN(x))

with scaled dot-product attention (scale 1/sqrt(D/H)), a 2-layer GELU MLP
of hidden width 4*D, a learnable CLS token at position 0, additive position
embeddings after patch embedding, and a final parameter-free layer norm
before the linear classifier head. Layer norms carry no learnable scale or
bias, so the whole parameter set is the embedding/projection matrices, and
a fixed seed makes the model bit-reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erf

from .bundle import FORMAT_VERSION, read_array, write_array
from .errors import (
    DegenerateRowError,
    InvalidConfigError,
    IoFailureError,
    ManifestMissingError,
    ShapeMismatchError,
)
from .tensorops import as_tensor, softmax

_LN_EPS = 1e-6
_INIT_SCALE = 0.05
_MLP_RATIO = 4


@dataclass(frozen=True)
class ViTConfig:
    image_size: tuple[int, int, int] = (16, 16, 1)  # (W, H, C)
    patch_size: int = 4
    n_layers: int = 2
    n_heads: int = 2
    embed_dim: int = 16
    n_classes: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        w, h, c = self.image_size
        if w < 1 or h < 1 or c < 1 or self.patch_size < 1:
            raise InvalidConfigError(f"bad image/patch dims: {self.image_size}, {self.patch_size}")
        if w % self.patch_size or h % self.patch_size:
            raise InvalidConfigError(
                f"image {w}x{h} not divisible by patch_size {self.patch_size}"
            )
        if self.n_layers < 1 or self.n_heads < 1 or self.n_classes < 1:
            raise InvalidConfigError("n_layers, n_heads and n_classes must be >= 1")
        if self.embed_dim % self.n_heads:
            raise InvalidConfigError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )

    @property
    def n_patches(self) -> int:
        w, h, _ = self.image_size
        return (w // self.patch_size) * (h // self.patch_size)

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.n_heads


@dataclass
class ViTModel:
    config: ViTConfig
    params: dict[str, np.ndarray]


class ForwardResult(NamedTuple):
    scores: np.ndarray     # [n_classes]
    attention: np.ndarray  # [L, H, P+1, P+1], post-softmax


def _param_specs(cfg: ViTConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in the fixed draw order used by init."""
    w, h, c = cfg.image_size
    d = cfg.embed_dim
    specs = [
        ("patch_embed", (cfg.patch_size * cfg.patch_size * c, d)),
        ("cls_token", (d,)),
        ("pos_embed", (cfg.n_patches + 1, d)),
    ]
    for layer in range(cfg.n_layers):
        specs += [
            (f"layer{layer}.wq", (d, d)),
            (f"layer{layer}.wk", (d, d)),
            (f"layer{layer}.wv", (d, d)),
            (f"layer{layer}.wo", (d, d)),
            (f"layer{layer}.mlp_w1", (d, _MLP_RATIO * d)),
            (f"layer{layer}.mlp_b1", (_MLP_RATIO * d,)),
            (f"layer{layer}.mlp_w2", (_MLP_RATIO * d, d)),
            (f"layer{layer}.mlp_b2", (d,)),
        ]
    specs.append(("classifier", (d, cfg.n_classes)))
    return specs


def init_model(config: ViTConfig) -> ViTModel:
    """Draw all parameters uniform in [-0.05, 0.05] from a seeded generator.

    The draw order is fixed, so an identical seed yields a bit-identical
    model on any platform.
    """
    rng = np.random.default_rng(config.rng_seed)
    params = {
        name: rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=shape)
        for name, shape in _param_specs(config)
    }
    return ViTModel(config=config, params=params)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """Split [W, H, C] into [P, patch_size*patch_size*C], patches row-major."""
    w, h, c = image.shape
    nr, nc = w // patch_size, h // patch_size
    blocks = image.reshape(nr, patch_size, nc, patch_size, c)
    return blocks.transpose(0, 2, 1, 3, 4).reshape(nr * nc, patch_size * patch_size * c)


def forward(model: ViTModel, image) -> ForwardResult:
    """Run one image through the encoder.

    Returns the classifier scores on the final CLS embedding and the full
    post-softmax attention tensor [L, H, P+1, P+1]; every attention row is
    a probability vector.
    """
    cfg = model.config
    img = as_tensor(image)
    if img.shape != tuple(cfg.image_size):
        raise ShapeMismatchError(
            f"image shape {img.shape} != config {tuple(cfg.image_size)}"
        )
    p = model.params
    tokens = patchify(img, cfg.patch_size) @ p["patch_embed"]       # [P, D]
    x = np.concatenate([p["cls_token"][None, :], tokens], axis=0)   # [P+1, D]
    x = x + p["pos_embed"]

    n_tok = cfg.n_patches + 1
    dh = cfg.head_dim
    attn_maps = np.empty((cfg.n_layers, cfg.n_heads, n_tok, n_tok))
    for layer in range(cfg.n_layers):
        h = _layer_norm(x)
        q = (h @ p[f"layer{layer}.wq"]).reshape(n_tok, cfg.n_heads, dh).transpose(1, 0, 2)
        k = (h @ p[f"layer{layer}.wk"]).reshape(n_tok, cfg.n_heads, dh).transpose(1, 0, 2)
        v = (h @ p[f"layer{layer}.wv"]).reshape(n_tok, cfg.n_heads, dh).transpose(1, 0, 2)
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)             # [H, T, T]
        attn = softmax(logits, axis=-1)
        attn_maps[layer] = attn
        heads_out = attn @ v                                        # [H, T, dh]
        merged = heads_out.transpose(1, 0, 2).reshape(n_tok, cfg.embed_dim)
        x = x + merged @ p[f"layer{layer}.wo"]

        h2 = _layer_norm(x)
        hidden = _gelu(h2 @ p[f"layer{layer}.mlp_w1"] + p[f"layer{layer}.mlp_b1"])
        x = x + hidden @ p[f"layer{layer}.mlp_w2"] + p[f"layer{layer}.mlp_b2"]

    cls_final = _layer_norm(x)[0]
    scores = cls_final @ p["classifier"]
    return ForwardResult(scores=scores, attention=attn_maps)


def extract_cls_attention(attention, keep_cls: bool = False) -> np.ndarray:
    """Reduce [L, H, P+1, P+1] attention to the CLS view over patches [L, H, P].

    Takes row 0 (the CLS query) of every head, drops the CLS->CLS column and
    renormalizes the remaining P entries to sum to 1. With ``keep_cls=True``
    the CLS->CLS entry is kept instead (output [L, H, P+1], no renorm), for
    checking how sensitive downstream scores are to that convention.
    """
    att = as_tensor(attention)
    if att.ndim != 4 or att.shape[2] != att.shape[3]:
        raise ShapeMismatchError(f"expected [L, H, T, T] attention, got {att.shape}")
    cls_rows = att[:, :, 0, :]                  # [L, H, P+1]
    if keep_cls:
        return cls_rows.copy()
    patch_part = cls_rows[:, :, 1:]             # [L, H, P]
    sums = patch_part.sum(axis=-1, keepdims=True)
    if np.any(sums < 1e-12):
        bad = np.argwhere(sums[..., 0] < 1e-12)[0]
        raise DegenerateRowError(
            f"head (layer {bad[0]}, head {bad[1]}): CLS attends only to itself"
        )
    return patch_part / sums


def save_model(model: ViTModel, path: str) -> None:
    """Write a model directory (manifest.json + one NPY file per parameter)."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoFailureError(f"cannot create model directory {path}: {e}") from e
    cfg = model.config
    files = {
        name: write_array(path, name.replace(".", "_"), arr)
        for name, arr in model.params.items()
    }
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "vit-model",
        "config": {
            "image_size": list(cfg.image_size),
            "patch_size": cfg.patch_size,
            "n_layers": cfg.n_layers,
            "n_heads": cfg.n_heads,
            "embed_dim": cfg.embed_dim,
            "n_classes": cfg.n_classes,
            "rng_seed": cfg.rng_seed,
        },
        "files": files,
    }
    try:
        with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
    except OSError as e:
        raise IoFailureError(f"cannot write model manifest: {e}") from e


def load_model(path: str) -> ViTModel:
    """Load a model directory written by save_model."""
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ManifestMissingError(f"no manifest.json in {path}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    raw = manifest["config"]
    config = ViTConfig(
        image_size=tuple(raw["image_size"]),
        patch_size=raw["patch_size"],
        n_layers=raw["n_layers"],
        n_heads=raw["n_heads"],
        embed_dim=raw["embed_dim"],
        n_classes=raw["n_classes"],
        rng_seed=raw["rng_seed"],
    )
    params = {
        name: read_array(path, entry, name)
        for name, entry in manifest["files"].items()
    }
    expected = {name for name, _ in _param_specs(config)}
    if set(params) != expected:
        raise ManifestMissingError(
            f"model files {sorted(set(params) ^ expected)} missing or unexpected"
        )
    return ViTModel(config=config, params=params)
