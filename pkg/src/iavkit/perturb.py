"""Input-disturbance harness: saliency-guided masking, blur and jigsaw.

Masking curves delete the most salient patches first and track how fast a
scorer's accuracy collapses; blur and jigsaw shift the input distribution
without touching any labels. All transforms are pure and seeded, so every
curve is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import AnalysisBundle
from .errors import (
    GridMismatchError,
    IndexOutOfRangeError,
    MissingImagesError,
    ShapeMismatchError,
)
from .tensorops import as_tensor

MASK_SOURCES = ("attention_head", "attention_mean", "attribution", "random")


@dataclass(frozen=True)
class MaskingPolicy:
    """Which saliency ranks the patches, and what to overwrite them with."""

    source: str
    ratio: float = 0.0
    fill: float = 0.0
    layer: int | None = None
    head: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.source not in MASK_SOURCES:
            raise ValueError(f"source must be one of {MASK_SOURCES}, got {self.source!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")
        if self.source == "attention_head" and (self.layer is None or self.head is None):
            raise ValueError("attention_head source needs layer and head")
        if self.source == "random" and self.seed is None:
            raise ValueError("random source needs a seed")


@dataclass(frozen=True)
class JigsawSpec:
    """Grid size, number of cell swaps, and the seed that picks them."""

    grid_size: int
    n_swaps: int
    seed: int = 0

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be >= 1, got {self.grid_size}")
        if self.n_swaps < 0:
            raise ValueError(f"n_swaps must be >= 0, got {self.n_swaps}")


def masked_patch_count(ratio: float, n_patches: int) -> int:
    """ceil(ratio * P), guarded against float noise in the product."""
    return int(math.ceil(ratio * n_patches - 1e-12)) if ratio > 0 else 0


def _patch_grid(w: int, h: int, n_patches: int) -> tuple[int, int, int]:
    """Square patch size and grid (rows, cols) for a W x H image with P patches."""
    ps = round((w * h / n_patches) ** 0.5)
    if ps < 1 or w % ps or h % ps or (w // ps) * (h // ps) != n_patches:
        raise ShapeMismatchError(
            f"image {w}x{h} has no square grid of {n_patches} patches"
        )
    return ps, w // ps, h // ps


def mask_image(image, saliency, ratio: float, fill: float = 0.0) -> np.ndarray:
    """Replace the ceil(ratio*P) most salient patches with a constant fill.

    Ties in the saliency are broken toward the lower patch index. Pixels
    outside the selected patches are returned bit-identical.
    """
    img = as_tensor(image)
    sal = as_tensor(saliency)
    if sal.ndim != 1:
        raise ShapeMismatchError(f"saliency must be rank-1, got {sal.shape}")
    if img.ndim not in (2, 3):
        raise ShapeMismatchError(f"image must be [W,H] or [W,H,C], got {img.shape}")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    n_patches = sal.shape[0]
    ps, _, nc = _patch_grid(img.shape[0], img.shape[1], n_patches)

    out = img.copy()
    count = masked_patch_count(ratio, n_patches)
    if count == 0:
        return out
    # Stable sort on the negated saliency: equal values keep ascending index.
    order = np.argsort(-sal, kind="stable")[:count]
    for patch in order:
        r, c = divmod(int(patch), nc)
        out[r * ps : (r + 1) * ps, c * ps : (c + 1) * ps, ...] = fill
    return out


def _saliencies(bundle: AnalysisBundle, policy: MaskingPolicy) -> np.ndarray:
    """Per-sample patch saliency [N, P] for the policy's source."""
    att = bundle.attention
    if policy.source == "attention_head":
        if not 0 <= policy.layer < bundle.n_layers or not 0 <= policy.head < bundle.n_heads:
            raise IndexOutOfRangeError(
                f"head ({policy.layer}, {policy.head}) outside "
                f"[{bundle.n_layers}, {bundle.n_heads}]"
            )
        return att[:, policy.layer, policy.head, :].copy()
    if policy.source == "attention_mean":
        mean = att.mean(axis=(1, 2))
        return mean / mean.sum(axis=-1, keepdims=True)
    if policy.source == "attribution":
        return bundle.attribution.copy()
    rng = np.random.default_rng(policy.seed)
    return rng.random((bundle.n_samples, bundle.n_patches))


def masking_curve(
    bundle: AnalysisBundle,
    scorer,
    policy: MaskingPolicy,
    ratios,
) -> list[tuple[float, float]]:
    """Accuracy of argmax(scorer(masked image)) vs labels, per masking ratio.

    The per-sample saliency is computed once and reused for every ratio, so
    a seeded random source yields the same masked patch sets across the
    whole curve. Ratio 0 leaves images untouched and reproduces the
    unmasked accuracy exactly.
    """
    if bundle.images is None:
        raise MissingImagesError("masking curve needs the bundle's images array")
    saliency = _saliencies(bundle, policy)
    curve = []
    for ratio in ratios:
        correct = 0
        for i in range(bundle.n_samples):
            masked = mask_image(bundle.images[i], saliency[i], ratio, policy.fill)
            predicted = int(np.argmax(scorer(masked)))
            correct += predicted == int(bundle.labels[i])
        curve.append((float(ratio), correct / bundle.n_samples))
    return curve


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps at integer offsets in [-ceil(3*sigma), +ceil(3*sigma)],
    normalized to sum exactly to 1."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    radius = math.ceil(3 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2 * sigma * sigma))
    return k / k.sum()


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=axis)
    return windows @ kernel


def gaussian_blur(image, sigma: float) -> np.ndarray:
    """Per-channel 2-D Gaussian blur with mirror padding at the borders.

    Separable convolution over the two spatial axes; sigma = 0 returns the
    image unchanged. Mirror padding folds boundary mass back into the
    image, so the total intensity is preserved.
    """
    img = as_tensor(image)
    if img.ndim not in (2, 3):
        raise ShapeMismatchError(f"image must be [W,H] or [W,H,C], got {img.shape}")
    if sigma == 0:
        return img.copy()
    kernel = gaussian_kernel(sigma)
    out = _convolve_axis(img, kernel, axis=0)
    return _convolve_axis(out, kernel, axis=1)


def jigsaw(image, spec: JigsawSpec) -> np.ndarray:
    """Swap grid cells of the image n_swaps times (seeded transpositions).

    Each swap exchanges two distinct uniformly chosen cells of the
    grid_size x grid_size partition; the output is a pixel-exact
    rearrangement of the input.
    """
    img = as_tensor(image)
    if img.ndim not in (2, 3):
        raise ShapeMismatchError(f"image must be [W,H] or [W,H,C], got {img.shape}")
    g = spec.grid_size
    w, h = img.shape[0], img.shape[1]
    if w % g or h % g:
        raise GridMismatchError(f"grid {g} does not divide image {w}x{h}")
    cell_w, cell_h = w // g, h // g

    def block(idx):
        r, c = divmod(idx, g)
        return (slice(r * cell_w, (r + 1) * cell_w), slice(c * cell_h, (c + 1) * cell_h))

    out = img.copy()
    rng = np.random.default_rng(spec.seed)
    for _ in range(spec.n_swaps):
        a, b = (int(x) for x in rng.choice(g * g, size=2, replace=False))
        block_a, block_b = block(a), block(b)
        tmp = out[block_a].copy()
        out[block_a] = out[block_b]
        out[block_b] = tmp
    return out


def blur_curve(
    bundle: AnalysisBundle, scorer, sigmas
) -> list[tuple[float, float]]:
    """Accuracy after Gaussian blur, per blur degree (sigma)."""
    if bundle.images is None:
        raise MissingImagesError("blur curve needs the bundle's images array")
    curve = []
    for sigma in sigmas:
        correct = 0
        for i in range(bundle.n_samples):
            blurred = gaussian_blur(bundle.images[i], float(sigma))
            correct += int(np.argmax(scorer(blurred))) == int(bundle.labels[i])
        curve.append((float(sigma), correct / bundle.n_samples))
    return curve


def jigsaw_curve(
    bundle: AnalysisBundle, scorer, grid_size: int, swap_counts, seed: int = 0
) -> list[tuple[int, float]]:
    """Accuracy after jigsaw shuffling, per swap count.

    Each sample gets its own child seed derived from `seed`, fixed across
    swap counts, so curves are reproducible end to end.
    """
    if bundle.images is None:
        raise MissingImagesError("jigsaw curve needs the bundle's images array")
    child_seeds = np.random.SeedSequence(seed).generate_state(bundle.n_samples)
    curve = []
    for k in swap_counts:
        correct = 0
        for i in range(bundle.n_samples):
            spec = JigsawSpec(grid_size=grid_size, n_swaps=int(k), seed=int(child_seeds[i]))
            shuffled = jigsaw(bundle.images[i], spec)
            correct += int(np.argmax(scorer(shuffled))) == int(bundle.labels[i])
        curve.append((int(k), correct / bundle.n_samples))
    return curve
