"""Agreement metrics between attention maps and input-attribution.

The core quantity is the IA-Score: the cosine similarity between a head's
CLS attention over patches and the patch-pooled input-attribution map,
which is in [0, 1] because both sides are non-negative. Stacking the score
for every head of every layer gives the per-sample IAV; averaging IAVs
over samples gives the global IAV. Replacing the per-sample attribution
with any fixed input-shaped baseline (a segmentation mask, another model's
heatmap) generalizes the same pipeline to the AAV.

Degenerate inputs (an all-zero attribution map) score 0.0 and are flagged
rather than raised: exported real-model data can contain such samples and
a batch analysis must not abort on them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .attribution import AttributionMap, validate_external_attribution
from .bundle import AnalysisBundle
from .errors import (
    EmptyBundleError,
    IndexOutOfRangeError,
    NotAProbabilityVectorError,
    SampleOrderMismatchError,
    ShapeMismatchError,
    ZeroVectorError,
)
from .tensorops import as_tensor, cosine_similarity

LABEL_MODES = ("predicted", "ground_truth")


@dataclass
class IavVector:
    """Per-head agreement scores for one sample, layer-major order.

    scores[l * n_heads + h] is the IA-Score of head h in layer l; heads
    whose score hit the zero-vector convention are listed in
    degenerate_heads as (layer, head) pairs.
    """

    scores: np.ndarray
    sample_index: int
    class_index: int
    degenerate_heads: list = field(default_factory=list)


@dataclass
class GlobalIav:
    """Elementwise mean of per-sample IAVs, same layer-major ordering."""

    scores: np.ndarray
    n_samples: int
    label_mode: str
    baseline_tag: str


@dataclass
class HeadProfile:
    """Distribution of IA-Scores (and attention entropy) for one head."""

    layer: int
    head: int
    median: float
    q1: float
    q3: float
    vmin: float
    vmax: float
    variance: float
    mean_entropy: float
    head_type: str  # "high" | "low"


@dataclass
class EntropyProfile:
    """Per-head attention-entropy statistics over all samples.

    Every field is an [L, H] array; `mean` is the per-head sample mean,
    the rest feed boxplot-style reporting.
    """

    mean: np.ndarray
    median: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray


def ia_score(attribution, attention) -> float:
    """Cosine agreement between one attribution map and one attention row.

    Both arguments are length-P vectors (an AttributionMap is unwrapped).
    All-zero attribution maps score 0.0 by convention instead of raising.
    """
    attr = attribution.values if isinstance(attribution, AttributionMap) else attribution
    attr = as_tensor(attr)
    att = as_tensor(attention)
    if attr.shape != att.shape or attr.ndim != 1:
        raise ShapeMismatchError(f"attribution {attr.shape} vs attention {att.shape}")
    try:
        return cosine_similarity(attr, att)
    except ZeroVectorError:
        return 0.0


def _check_label_mode(label_mode: str) -> str:
    mode = label_mode.replace("-", "_")
    if mode not in LABEL_MODES:
        raise ValueError(f"label_mode must be one of {LABEL_MODES}, got {label_mode!r}")
    return mode


def iav(bundle: AnalysisBundle, sample_index: int, class_index: int) -> IavVector:
    """IA-Score of every head for one sample: an L*H layer-major vector."""
    if not 0 <= sample_index < bundle.n_samples:
        raise IndexOutOfRangeError(f"sample {sample_index} not in [0, {bundle.n_samples})")
    if not 0 <= class_index < bundle.n_classes:
        raise IndexOutOfRangeError(f"class {class_index} not in [0, {bundle.n_classes})")
    attr = bundle.attribution[sample_index]
    n_layers, n_heads = bundle.n_layers, bundle.n_heads
    scores = np.zeros(n_layers * n_heads)
    degenerate = []
    for layer in range(n_layers):
        for head in range(n_heads):
            try:
                score = cosine_similarity(attr, bundle.attention[sample_index, layer, head])
            except ZeroVectorError:
                score = 0.0
                degenerate.append((layer, head))
            scores[layer * n_heads + head] = score
    return IavVector(
        scores=scores,
        sample_index=sample_index,
        class_index=class_index,
        degenerate_heads=degenerate,
    )


def global_iav(bundle: AnalysisBundle, label_mode: str = "predicted") -> GlobalIav:
    """Mean IAV over all samples, the class per sample chosen by label_mode.

    Samples are accumulated in index order so the reduction is bit
    reproducible regardless of how callers parallelize elsewhere.
    """
    mode = _check_label_mode(label_mode)
    if bundle.n_samples == 0:
        raise EmptyBundleError("global IAV needs at least one sample")
    classes = bundle.predictions if mode == "predicted" else bundle.labels
    total = np.zeros(bundle.n_layers * bundle.n_heads)
    for i in range(bundle.n_samples):
        total += iav(bundle, i, int(classes[i])).scores
    return GlobalIav(
        scores=total / bundle.n_samples,
        n_samples=bundle.n_samples,
        label_mode=mode,
        baseline_tag="self-attribution",
    )


def _baseline_rows(bundle: AnalysisBundle, baseline) -> tuple[np.ndarray, str]:
    """Turn any accepted baseline form into per-sample rows [N, P] + a tag."""
    n, p = bundle.n_samples, bundle.n_patches
    if isinstance(baseline, AttributionMap):
        validated = validate_external_attribution(baseline, p)
        return np.tile(validated.values, (n, 1)), validated.method_tag
    if isinstance(baseline, (list, tuple)):
        if len(baseline) != n:
            raise ShapeMismatchError(f"need {n} per-sample baselines, got {len(baseline)}")
        rows = [validate_external_attribution(m, p).values for m in baseline]
        tag = baseline[0].method_tag if baseline else "external"
        return np.stack(rows), tag
    arr = as_tensor(baseline)
    if arr.ndim == 1:
        wrapped = AttributionMap(values=arr, class_index=0, method_tag="external")
        return np.tile(validate_external_attribution(wrapped, p).values, (n, 1)), "external"
    if arr.ndim == 2 and arr.shape == (n, p):
        return np.where(arr < 0, 0.0, arr), "external"
    if arr.ndim == 2:
        wrapped = AttributionMap(values=arr, class_index=0, method_tag="external")
        return np.tile(validate_external_attribution(wrapped, p).values, (n, 1)), "external"
    if arr.ndim == 3 and arr.shape[0] == n:
        rows = [
            validate_external_attribution(
                AttributionMap(values=a, class_index=0, method_tag="external"), p
            ).values
            for a in arr
        ]
        return np.stack(rows), "external"
    raise ShapeMismatchError(f"unsupported baseline shape {arr.shape}")


def aav(
    bundle: AnalysisBundle,
    baseline,
    label_mode: str = "predicted",
    baseline_tag: str | None = None,
) -> GlobalIav:
    """Global agreement of attention with an arbitrary baseline map.

    `baseline` may be a single AttributionMap or array (shared by all
    samples, pixel- or patch-level) or a per-sample [N, P] / [N, W, H]
    array / list of maps. The rest of the pipeline is identical to
    global_iav with the baseline replacing the bundle's own attribution.
    """
    mode = _check_label_mode(label_mode)
    if bundle.n_samples == 0:
        raise EmptyBundleError("AAV needs at least one sample")
    rows, derived_tag = _baseline_rows(bundle, baseline)
    total = np.zeros(bundle.n_layers * bundle.n_heads)
    for i in range(bundle.n_samples):
        for layer in range(bundle.n_layers):
            for head in range(bundle.n_heads):
                try:
                    score = cosine_similarity(rows[i], bundle.attention[i, layer, head])
                except ZeroVectorError:
                    score = 0.0
                total[layer * bundle.n_heads + head] += score
    return GlobalIav(
        scores=total / bundle.n_samples,
        n_samples=bundle.n_samples,
        label_mode=mode,
        baseline_tag=baseline_tag if baseline_tag is not None else derived_tag,
    )


def attention_entropy(attention) -> float:
    """Natural-log Shannon entropy of one attention row (0*log0 := 0).

    The row must be a probability vector: non-negative, summing to 1
    within 1e-6. Result lies in [0, ln P].
    """
    att = as_tensor(attention)
    if att.ndim != 1:
        raise NotAProbabilityVectorError(f"expected rank-1 vector, got {att.shape}")
    if np.any(att < 0):
        raise NotAProbabilityVectorError("negative entries")
    total = att.sum()
    if abs(total - 1.0) > 1e-6:
        raise NotAProbabilityVectorError(f"sums to {total}, not 1")
    positive = att[att > 0]
    return max(0.0, float(-(positive * np.log(positive)).sum()))


def entropy_profile(bundle: AnalysisBundle) -> EntropyProfile:
    """Per-head mean attention entropy plus boxplot statistics over samples."""
    if bundle.n_samples == 0:
        raise EmptyBundleError("entropy profile needs at least one sample")
    att = bundle.attention
    per_sample = -np.where(att > 0, att * np.log(np.where(att > 0, att, 1.0)), 0.0).sum(
        axis=-1
    )  # [N, L, H]
    per_sample = np.maximum(per_sample, 0.0)
    q1, q3 = np.percentile(per_sample, [25, 75], axis=0)
    return EntropyProfile(
        mean=per_sample.mean(axis=0),
        median=np.median(per_sample, axis=0),
        q1=q1,
        q3=q3,
        vmin=per_sample.min(axis=0),
        vmax=per_sample.max(axis=0),
    )


def _per_head_scores(bundle: AnalysisBundle) -> np.ndarray:
    """IA-Score of every (sample, layer, head) triple as an [N, L, H] array."""
    n, n_layers, n_heads = bundle.n_samples, bundle.n_layers, bundle.n_heads
    scores = np.zeros((n, n_layers, n_heads))
    for i in range(n):
        vec = iav(bundle, i, int(bundle.predictions[i])).scores
        scores[i] = vec.reshape(n_layers, n_heads)
    return scores


def classify_heads(bundle: AnalysisBundle) -> list[HeadProfile]:
    """Profile every head's IA-Score distribution and type it high or low.

    A head is "high" when its median IA-Score over samples exceeds 0.5 and
    "low" below; an exact 0.5 tie classifies as "high" so the typing always
    partitions all heads.
    """
    if bundle.n_samples == 0:
        raise EmptyBundleError("head classification needs at least one sample")
    scores = _per_head_scores(bundle)
    entropies = entropy_profile(bundle)
    profiles = []
    for layer in range(bundle.n_layers):
        for head in range(bundle.n_heads):
            dist = scores[:, layer, head]
            median = float(np.median(dist))
            q1, q3 = np.percentile(dist, [25, 75])
            profiles.append(
                HeadProfile(
                    layer=layer,
                    head=head,
                    median=median,
                    q1=float(q1),
                    q3=float(q3),
                    vmin=float(dist.min()),
                    vmax=float(dist.max()),
                    variance=float(dist.var()),
                    mean_entropy=float(entropies.mean[layer, head]),
                    head_type="high" if median >= 0.5 else "low",
                )
            )
    return profiles


def _unit_or_zero(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else np.zeros_like(v)


def checkpoint_diff(
    bundle_t: AnalysisBundle, bundle_final: AnalysisBundle, target: str = "attribution"
) -> float:
    """Mean L2 distance between two checkpoints' normalized heatmaps.

    For target="attribution": per sample, the distance between the two
    L2-normalized patch attribution maps, averaged over samples. For
    target="attention": per sample the per-head distances between
    normalized CLS attention rows are averaged over all L*H heads first,
    then over samples. Normalizing makes the statistic scale-free; two
    disjoint-support unit maps are sqrt(2) apart.
    """
    if target not in ("attribution", "attention"):
        raise ValueError(f"target must be 'attribution' or 'attention', got {target!r}")
    if bundle_t.attention.shape != bundle_final.attention.shape:
        raise ShapeMismatchError(
            f"attention dims differ: {bundle_t.attention.shape} vs {bundle_final.attention.shape}"
        )
    if bundle_t.attribution.shape != bundle_final.attribution.shape:
        raise ShapeMismatchError("attribution dims differ")
    if not np.array_equal(bundle_t.labels, bundle_final.labels):
        raise SampleOrderMismatchError("labels differ: bundles hold different samples")

    n = bundle_t.n_samples
    if n == 0:
        raise EmptyBundleError("checkpoint diff needs at least one sample")
    total = 0.0
    if target == "attribution":
        for i in range(n):
            u = _unit_or_zero(bundle_t.attribution[i])
            v = _unit_or_zero(bundle_final.attribution[i])
            total += float(np.linalg.norm(u - v))
        return total / n
    for i in range(n):
        head_total = 0.0
        for layer in range(bundle_t.n_layers):
            for head in range(bundle_t.n_heads):
                u = _unit_or_zero(bundle_t.attention[i, layer, head])
                v = _unit_or_zero(bundle_final.attention[i, layer, head])
                head_total += float(np.linalg.norm(u - v))
        total += head_total / (bundle_t.n_layers * bundle_t.n_heads)
    return total / n


def write_head_profiles_csv(profiles: list[HeadProfile], path: str) -> None:
    """One row per head: l, h, median, q1, q3, min, max, mean_entropy, head_type."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["l", "h", "median", "q1", "q3", "min", "max", "mean_entropy", "head_type"]
        )
        for p in profiles:
            writer.writerow(
                [p.layer, p.head, repr(p.median), repr(p.q1), repr(p.q3),
                 repr(p.vmin), repr(p.vmax), repr(p.mean_entropy), p.head_type]
            )


def write_head_profiles_json(profiles: list[HeadProfile], path: str) -> None:
    """JSON export; includes the variance field for downstream head studies."""
    rows = [
        {
            "l": p.layer,
            "h": p.head,
            "median": p.median,
            "q1": p.q1,
            "q3": p.q3,
            "min": p.vmin,
            "max": p.vmax,
            "variance": p.variance,
            "mean_entropy": p.mean_entropy,
            "head_type": p.head_type,
        }
        for p in profiles
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=2)
