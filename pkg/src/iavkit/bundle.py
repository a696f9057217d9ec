"""Reading and writing analysis-bundle directories.

A bundle directory is the interchange format between whatever produced the
model data (the built-in toy ViT or an external exporter) and every
analysis in this package:

    <bundle>/
        manifest.json       UTF-8 JSON: dims, class names, file table
        attention.npy       float64 [N, L, H, P], each (l, h) row sums to 1
        attribution.npy     float64 [N, P] patch level, or [N, W, H] pixel level
        labels.npy          int64 [N]
        predictions.npy     int64 [N]
        images.npy          optional float64 [N, W, H, C]

Arrays are NPY v1.0 files (little-endian, C-order); the manifest carries a
CRC-32 per file for corruption detection. Pixel-level attribution is pooled
to patch resolution at load time so downstream code always sees [N, P].
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChecksumMismatchError,
    InvariantViolationError,
    IoFailureError,
    ManifestMissingError,
    ShapeMismatchError,
)
from .tensorops import pool_to_patches

FORMAT_VERSION = "1.0"

# Loader renormalizes an attention row only when its sum is further from 1
# than this; rows already normalized are left bit-identical so that
# save -> load is the exact identity on canonical bundles.
ROW_SUM_EXACT = 1e-12
ROW_SUM_TOLERANCE = 1e-5


@dataclass
class LoadReport:
    """What the loader had to fix up while ingesting a bundle."""

    clamped_negative_attribution: int = 0
    renormalized_attention_rows: int = 0
    pooled_pixel_attribution: bool = False


@dataclass
class AnalysisBundle:
    """In-memory view of one bundle: model outputs for N samples.

    `attribution` is [N, P] after loading; a hand-built bundle may hold a
    pixel-level [N, W, H] array, which `save_bundle` writes as-is and
    `load_bundle` pools back down.
    """

    attention: np.ndarray
    attribution: np.ndarray
    labels: np.ndarray
    predictions: np.ndarray
    class_names: list[str]
    images: np.ndarray | None = None
    attribution_method: str = "unknown"
    checkpoint_tag: str = ""
    patch_size: int | None = None
    load_report: LoadReport | None = None

    @property
    def n_samples(self) -> int:
        return self.attention.shape[0]

    @property
    def n_layers(self) -> int:
        return self.attention.shape[1]

    @property
    def n_heads(self) -> int:
        return self.attention.shape[2]

    @property
    def n_patches(self) -> int:
        return self.attention.shape[3]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class Manifest:
    """manifest.json contents: dims, metadata and the file table."""

    format_version: str
    dims: dict
    class_names: list[str]
    attribution_method: str
    checkpoint_tag: str
    files: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": self.format_version,
                "dims": self.dims,
                "class_names": self.class_names,
                "attribution_method": self.attribution_method,
                "checkpoint_tag": self.checkpoint_tag,
                "files": self.files,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        raw = json.loads(text)
        return cls(
            format_version=raw["format_version"],
            dims=raw["dims"],
            class_names=list(raw["class_names"]),
            attribution_method=raw["attribution_method"],
            checkpoint_tag=raw.get("checkpoint_tag", ""),
            files=raw["files"],
        )


def write_array(dirpath: str, name: str, arr: np.ndarray) -> dict:
    """Write `<dirpath>/<name>.npy` atomically; return its manifest entry."""
    filename = f"{name}.npy"
    target = os.path.join(dirpath, filename)
    try:
        fd, tmp = tempfile.mkstemp(dir=dirpath, suffix=".npy.tmp")
        with os.fdopen(fd, "wb") as f:
            np.save(f, np.ascontiguousarray(arr))
        os.replace(tmp, target)
    except OSError as e:
        raise IoFailureError(f"cannot write {target}: {e}") from e
    with open(target, "rb") as f:
        crc = zlib.crc32(f.read())
    return {"path": filename, "shape": list(arr.shape), "crc32": crc}


def read_array(dirpath: str, entry: dict, name: str) -> np.ndarray:
    """Load an array declared in a manifest, verifying shape and CRC-32."""
    path = os.path.join(dirpath, entry["path"])
    if not os.path.isfile(path):
        raise IoFailureError(f"declared array file missing: {path}")
    with open(path, "rb") as f:
        data = f.read()
    crc = zlib.crc32(data)
    if crc != entry["crc32"]:
        raise ChecksumMismatchError(
            f"{name}: CRC-32 {crc} != declared {entry['crc32']}"
        )
    arr = np.load(path)
    if tuple(arr.shape) != tuple(entry["shape"]):
        raise ShapeMismatchError(
            f"{name}: file shape {arr.shape} != declared {tuple(entry['shape'])}"
        )
    return arr


def validate_bundle(b: AnalysisBundle) -> None:
    """Raise if the in-memory bundle violates any bundle invariant."""
    if b.attention.ndim != 4:
        raise ShapeMismatchError(f"attention must be [N,L,H,P], got {b.attention.shape}")
    n = b.n_samples
    if b.attribution.ndim not in (2, 3) or b.attribution.shape[0] != n:
        raise ShapeMismatchError(
            f"attribution first dim must be {n}, got {b.attribution.shape}"
        )
    for name, arr in (("labels", b.labels), ("predictions", b.predictions)):
        if arr.shape != (n,):
            raise ShapeMismatchError(f"{name} must be [{n}], got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ShapeMismatchError(f"{name} must be integer, got {arr.dtype}")
    if b.images is not None and (b.images.ndim != 4 or b.images.shape[0] != n):
        raise ShapeMismatchError(f"images must be [N,W,H,C], got {b.images.shape}")

    if np.any(b.attention < 0):
        raise InvariantViolationError("attention contains negative entries")
    row_sums = b.attention.sum(axis=-1)
    worst = float(np.abs(row_sums - 1.0).max()) if row_sums.size else 0.0
    if worst > ROW_SUM_TOLERANCE:
        raise InvariantViolationError(
            f"attention row sum deviates from 1 by {worst:.3g} (> {ROW_SUM_TOLERANCE})"
        )
    if np.any(b.attribution < 0):
        raise InvariantViolationError("attribution contains negative values")
    if n and b.n_classes:
        for name, arr in (("labels", b.labels), ("predictions", b.predictions)):
            if arr.min() < 0 or arr.max() >= b.n_classes:
                raise InvariantViolationError(
                    f"{name} outside [0, {b.n_classes}): min {arr.min()}, max {arr.max()}"
                )


def save_bundle(bundle: AnalysisBundle, path: str) -> None:
    """Write a bundle directory; load_bundle(path) reproduces it bit-exactly.

    The bundle must already satisfy its invariants (attention rows summing
    to 1 within tolerance, non-negative attribution).
    """
    validate_bundle(bundle)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoFailureError(f"cannot create bundle directory {path}: {e}") from e

    dims = {
        "n_samples": bundle.n_samples,
        "n_layers": bundle.n_layers,
        "n_heads": bundle.n_heads,
        "n_patches": bundle.n_patches,
        "image_size": list(bundle.images.shape[1:]) if bundle.images is not None else None,
        "patch_size": bundle.patch_size,
    }
    files = {
        "attention": write_array(path, "attention", bundle.attention.astype("<f8")),
        "attribution": write_array(path, "attribution", bundle.attribution.astype("<f8")),
        "labels": write_array(path, "labels", bundle.labels.astype("<i8")),
        "predictions": write_array(path, "predictions", bundle.predictions.astype("<i8")),
    }
    if bundle.images is not None:
        files["images"] = write_array(path, "images", bundle.images.astype("<f8"))

    manifest = Manifest(
        format_version=FORMAT_VERSION,
        dims=dims,
        class_names=list(bundle.class_names),
        attribution_method=bundle.attribution_method,
        checkpoint_tag=bundle.checkpoint_tag,
        files=files,
    )
    manifest_path = os.path.join(path, "manifest.json")
    try:
        fd, tmp = tempfile.mkstemp(dir=path, suffix=".json.tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(manifest.to_json())
        os.replace(tmp, manifest_path)
    except OSError as e:
        raise IoFailureError(f"cannot write manifest to {path}: {e}") from e


def _derive_patch_size(manifest: Manifest, n_patches: int) -> int | None:
    ps = manifest.dims.get("patch_size")
    if ps is not None:
        return int(ps)
    image_size = manifest.dims.get("image_size")
    if image_size is None:
        return None
    w, h = int(image_size[0]), int(image_size[1])
    # Square patches: (w/ps) * (h/ps) = P.
    ps = round((w * h / n_patches) ** 0.5)
    if ps > 0 and w % ps == 0 and h % ps == 0 and (w // ps) * (h // ps) == n_patches:
        return ps
    return None


def load_bundle(path: str) -> AnalysisBundle:
    """Load and validate a bundle directory.

    Fix-ups applied on ingest (reported in ``bundle.load_report``):
    attention rows within tolerance of sum 1 are renormalized to exactly 1;
    pixel-level attribution is pooled to patch resolution; negative
    attribution values are clamped to zero.
    """
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ManifestMissingError(f"no manifest.json in {path}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = Manifest.from_json(f.read())

    report = LoadReport()
    arrays = {}
    for name, entry in manifest.files.items():
        arrays[name] = read_array(path, entry, name)

    for required in ("attention", "attribution", "labels", "predictions"):
        if required not in arrays:
            raise ManifestMissingError(f"manifest declares no {required} array")

    attention = np.ascontiguousarray(arrays["attention"], dtype=np.float64)
    if attention.ndim != 4:
        raise ShapeMismatchError(f"attention must be [N,L,H,P], got {attention.shape}")
    if np.any(attention < 0):
        raise InvariantViolationError("attention contains negative entries")
    row_sums = attention.sum(axis=-1, keepdims=True)
    deviation = np.abs(row_sums - 1.0)
    if row_sums.size and deviation.max() > ROW_SUM_TOLERANCE:
        raise InvariantViolationError(
            f"attention row sum deviates from 1 by {float(deviation.max()):.3g}"
        )
    off = deviation > ROW_SUM_EXACT
    if np.any(off):
        attention = np.where(off, attention / row_sums, attention)
        report.renormalized_attention_rows = int(off.sum())

    attribution = np.ascontiguousarray(arrays["attribution"], dtype=np.float64)
    n_patches = attention.shape[3]
    if attribution.ndim == 3:
        ps = _derive_patch_size(manifest, n_patches)
        if ps is None:
            raise ShapeMismatchError(
                "pixel-level attribution needs patch_size or image_size in manifest"
            )
        pooled = np.stack([pool_to_patches(a, ps) for a in attribution])
        attribution = pooled
        report.pooled_pixel_attribution = True
    if attribution.ndim != 2 or attribution.shape[1] != n_patches:
        raise ShapeMismatchError(
            f"attribution must pool to [N, {n_patches}], got {attribution.shape}"
        )
    negatives = attribution < 0
    if np.any(negatives):
        report.clamped_negative_attribution = int(negatives.sum())
        attribution = np.where(negatives, 0.0, attribution)

    bundle = AnalysisBundle(
        attention=attention,
        attribution=attribution,
        labels=arrays["labels"].astype(np.int64),
        predictions=arrays["predictions"].astype(np.int64),
        class_names=manifest.class_names,
        images=(
            np.ascontiguousarray(arrays["images"], dtype=np.float64)
            if "images" in arrays
            else None
        ),
        attribution_method=manifest.attribution_method,
        checkpoint_tag=manifest.checkpoint_tag,
        patch_size=_derive_patch_size(manifest, n_patches),
        load_report=report,
    )
    validate_bundle(bundle)
    return bundle
