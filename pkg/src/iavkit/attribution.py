"""Input-attribution heatmaps: the built-in occlusion generator and the
validator for externally supplied maps.

Occlusion is forward-only: the importance of patch p for class c is the
drop in the class score when that patch is replaced by a baseline value,
clamped at zero (a patch whose removal raises the score counts as zero
importance). Gradient-based methods live outside this package; their maps
arrive through bundles and pass through validate_external_attribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .tensorops import as_tensor, pool_to_patches
from .vit import ViTModel, forward


@dataclass
class AttributionMap:
    """A non-negative importance map for one sample and one class.

    `values` is either patch resolution [P] or pixel resolution [W, H];
    `degenerate` marks an all-zero map (score 0 downstream, never an error).
    """

    values: np.ndarray
    class_index: int
    method_tag: str = "unknown"
    degenerate: bool = False
    n_clamped: int = field(default=0, compare=False)


def _class_scores(model, image: np.ndarray) -> np.ndarray:
    if isinstance(model, ViTModel):
        return forward(model, image).scores
    return np.asarray(model(image), dtype=np.float64)


def occlusion_attribution(
    model,
    image,
    class_index: int,
    baseline_value: float = 0.0,
    patch_size: int | None = None,
) -> AttributionMap:
    """Occlusion importance of every patch for `class_index`.

    `model` is a ViTModel or any callable image -> score vector; for a
    callable, `patch_size` must be given. values[p] = max(0, f_c(x) -
    f_c(x with patch p set to baseline_value)), patches row-major.
    """
    img = as_tensor(image)
    if isinstance(model, ViTModel):
        patch_size = model.config.patch_size
        if img.shape != tuple(model.config.image_size):
            raise ShapeMismatchError(
                f"image {img.shape} != model config {tuple(model.config.image_size)}"
            )
    elif patch_size is None:
        raise ShapeMismatchError("patch_size required when model is a plain scorer")
    if img.ndim != 3:
        raise ShapeMismatchError(f"image must be [W, H, C], got {img.shape}")
    w, h, _ = img.shape
    if w % patch_size or h % patch_size:
        raise ShapeMismatchError(f"image {w}x{h} not divisible by patch {patch_size}")

    base = float(_class_scores(model, img)[class_index])
    nr, nc = w // patch_size, h // patch_size
    values = np.zeros(nr * nc)
    for p in range(nr * nc):
        r, c = divmod(p, nc)
        occluded = img.copy()
        occluded[
            r * patch_size : (r + 1) * patch_size,
            c * patch_size : (c + 1) * patch_size,
            :,
        ] = baseline_value
        drop = base - float(_class_scores(model, occluded)[class_index])
        values[p] = max(0.0, drop)

    return AttributionMap(
        values=values,
        class_index=class_index,
        method_tag="occlusion",
        degenerate=not np.any(values > 0),
    )


def validate_external_attribution(
    amap: AttributionMap, expected_patch_count: int
) -> AttributionMap:
    """Bring an externally produced map to clean patch resolution.

    Pixel-level maps are mean-pooled to patches (square patch size derived
    from the pixel dims and the patch count); negative values are clamped
    to zero with the count recorded; an all-zero result passes but carries
    degenerate=True. Idempotent: a map that is already valid comes back
    value-identical.
    """
    values = as_tensor(amap.values)
    n_clamped = amap.n_clamped
    if values.ndim == 2:
        w, h = values.shape
        ps = round((w * h / expected_patch_count) ** 0.5)
        if ps < 1 or w % ps or h % ps or (w // ps) * (h // ps) != expected_patch_count:
            raise ShapeMismatchError(
                f"pixel map {w}x{h} has no square patch grid of {expected_patch_count}"
            )
        values = pool_to_patches(values, ps)
    elif values.ndim != 1 or values.shape[0] != expected_patch_count:
        raise ShapeMismatchError(
            f"attribution shape {values.shape} matches neither [P={expected_patch_count}]"
            " nor a pixel map"
        )
    negatives = values < 0
    if np.any(negatives):
        n_clamped += int(negatives.sum())
        values = np.where(negatives, 0.0, values)
    return AttributionMap(
        values=values,
        class_index=amap.class_index,
        method_tag=amap.method_tag,
        degenerate=not np.any(values > 0),
        n_clamped=n_clamped,
    )
