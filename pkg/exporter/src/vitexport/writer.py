"""Bundle-directory writer: the on-disk contract with the analysis toolkit.

Emits the exact layout the analysis package loads: manifest.json plus one
NPY v1.0 file per array (float64/int64 little-endian, C-order) with a
CRC-32 per file recorded in the manifest. This module is self-contained on
purpose: the exporter talks to the analysis side only through this format.
"""

from __future__ import annotations

import json
import os
import zlib

import numpy as np

FORMAT_VERSION = "1.0"


def _write_array(dirpath: str, name: str, arr: np.ndarray) -> dict:
    filename = f"{name}.npy"
    path = os.path.join(dirpath, filename)
    np.save(path, np.ascontiguousarray(arr))
    with open(path, "rb") as f:
        crc = zlib.crc32(f.read())
    return {"path": filename, "shape": list(arr.shape), "crc32": crc}


def write_bundle(
    path: str,
    attention: np.ndarray,       # [N, L, H, P]
    attribution: np.ndarray,     # [N, P] or [N, H_img, W_img]
    labels: np.ndarray,
    predictions: np.ndarray,
    class_names: list[str],
    attribution_method: str,
    checkpoint_tag: str,
    patch_size: int,
    images: np.ndarray | None = None,   # [N, H_img, W_img, C]
) -> None:
    os.makedirs(path, exist_ok=True)
    files = {
        "attention": _write_array(path, "attention", attention.astype("<f8")),
        "attribution": _write_array(path, "attribution", attribution.astype("<f8")),
        "labels": _write_array(path, "labels", labels.astype("<i8")),
        "predictions": _write_array(path, "predictions", predictions.astype("<i8")),
    }
    if images is not None:
        files["images"] = _write_array(path, "images", images.astype("<f8"))

    manifest = {
        "format_version": FORMAT_VERSION,
        "dims": {
            "n_samples": int(attention.shape[0]),
            "n_layers": int(attention.shape[1]),
            "n_heads": int(attention.shape[2]),
            "n_patches": int(attention.shape[3]),
            "image_size": list(images.shape[1:]) if images is not None else None,
            "patch_size": patch_size,
        },
        "class_names": list(class_names),
        "attribution_method": attribution_method,
        "checkpoint_tag": checkpoint_tag,
        "files": files,
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True))
