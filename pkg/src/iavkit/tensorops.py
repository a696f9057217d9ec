"""Elementwise, reduction and reshaping primitives shared by every analysis.

All values flow through here as 64-bit float numpy arrays in C (row-major)
order. The helpers validate finiteness once at the boundary so downstream
math never has to re-check for NaN/Inf.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteInputError, ShapeMismatchError, ZeroVectorError


def as_tensor(data, shape=None) -> np.ndarray:
    """Convert `data` to a finite float64 C-order array.

    Raises NonFiniteInputError if any element is NaN or infinite, and
    ShapeMismatchError if `shape` is given and does not match.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("tensor contains NaN or Inf")
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise ShapeMismatchError(f"expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def _as_vector(x, name: str) -> np.ndarray:
    v = as_tensor(x)
    if v.ndim != 1:
        raise ShapeMismatchError(f"{name} must be rank-1, got rank {v.ndim}")
    return v


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two rank-1 tensors, clipped to [-1, 1].

    Raises ZeroVectorError when either vector has zero L2 norm; the
    caller decides whether that maps to a score of 0 or is fatal.
    """
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape != vb.shape or va.size < 1:
        raise ShapeMismatchError(f"length mismatch: {va.shape} vs {vb.shape}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def l2_normalize(v) -> np.ndarray:
    """Scale a rank-1 tensor to unit L2 norm. Raises ZeroVectorError on 0."""
    vec = _as_vector(v, "v")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ZeroVectorError("cannot normalize zero vector")
    return vec / norm


def pool_to_patches(pixel_map, patch_size: int) -> np.ndarray:
    """Average-pool a rank-2 pixel map into a flat vector of patch means.

    Patches are ordered row-major: left-to-right within a row of patches,
    rows top-to-bottom, matching the patch ordering used by the ViT
    patchifier so patch index p always names the same image region.
    """
    arr = as_tensor(pixel_map)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"pixel map must be rank-2, got rank {arr.ndim}")
    if patch_size < 1:
        raise ShapeMismatchError(f"patch_size must be positive, got {patch_size}")
    rows, cols = arr.shape
    if rows % patch_size or cols % patch_size:
        raise ShapeMismatchError(
            f"map {rows}x{cols} not divisible by patch_size {patch_size}"
        )
    nr, nc = rows // patch_size, cols // patch_size
    blocks = arr.reshape(nr, patch_size, nc, patch_size)
    return blocks.mean(axis=(1, 3)).ravel()


def softmax(x, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis` (max-subtraction form).

    Output rows are positive and sum to 1 within 1e-12; adding a constant
    to all inputs does not change the result.
    """
    arr = as_tensor(x)
    shifted = arr - arr.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)
