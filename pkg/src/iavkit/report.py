"""Batch analysis runner: loads bundles, emits CSV/JSON tables and figures.

Every figure is a derived view of a CSV written next to it, CSVs keep
canonical (layer, head) ordering, and all outputs are written atomically
(temp file then rename) so concurrent readers never see partial files.
"""

from __future__ import annotations

import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import figures
from .attribution import occlusion_attribution
from .bundle import AnalysisBundle, load_bundle, save_bundle
from .embedding import TsneConfig, layer_slice, tsne
from .errors import IavkitError, InvalidConfigError
from .metrics import (
    aav,
    checkpoint_diff,
    classify_heads,
    entropy_profile,
    global_iav,
    iav,
    write_head_profiles_csv,
    write_head_profiles_json,
)
from .perturb import MaskingPolicy, blur_curve, jigsaw_curve, masking_curve
from .vit import ViTConfig, ViTModel, extract_cls_attention, forward, init_model, load_model, save_model

ANALYSES = (
    "iav", "global-iav", "aav", "entropy", "heads",
    "mask-curve", "perturb", "embed", "diff",
)

DEFAULT_RATIOS = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_BLUR_SIGMAS = (0.0, 0.5, 1.0, 2.0)
DEFAULT_JIGSAW_SWAPS = (0, 1, 2, 4, 8)


@dataclass
class ReportSpec:
    bundles: list[str]
    analyses: list[str]
    out_dir: str
    figures: bool = False
    seed: int = 0
    label_mode: str | None = None       # None: predicted, except embed -> ground_truth
    ratios: tuple = DEFAULT_RATIOS
    mask_source: str = "all"            # "all" or one of the MaskingPolicy sources
    mask_fill: float = 0.0
    mask_layer: int | None = None
    mask_head: int | None = None
    blur_sigmas: tuple = DEFAULT_BLUR_SIGMAS
    jigsaw_grid: int = 2
    jigsaw_swaps: tuple = DEFAULT_JIGSAW_SWAPS
    embed_layer: int | None = None      # None: last layer
    baseline_path: str | None = None    # .npy baseline for aav
    final_bundle: str | None = None     # reference bundle for diff
    model_path: str | None = None       # scorer model; default <bundle>/model
    sort_heads: bool = False            # heatmap presentation only
    skip_unavailable: bool = False      # report mode: skip analyses missing inputs

    def __post_init__(self):
        if not self.analyses:
            raise InvalidConfigError("select at least one analysis")
        unknown = [a for a in self.analyses if a not in ANALYSES]
        if unknown:
            raise InvalidConfigError(f"unknown analyses {unknown}; valid: {ANALYSES}")
        if not self.bundles:
            raise InvalidConfigError("give at least one bundle path")

    def label_mode_for(self, analysis: str) -> str:
        if self.label_mode is not None:
            return self.label_mode
        return "ground_truth" if analysis == "embed" else "predicted"


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def write_csv_atomic(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    write_text_atomic(path, buf.getvalue())


def _score_grid(scores: np.ndarray, n_layers: int, n_heads: int) -> np.ndarray:
    return scores.reshape(n_layers, n_heads)


def _head_rows(scores: np.ndarray, n_layers: int, n_heads: int) -> list[list]:
    grid = _score_grid(scores, n_layers, n_heads)
    return [
        [layer, head, float(grid[layer, head])]
        for layer in range(n_layers)
        for head in range(n_heads)
    ]


def make_synthetic_bundle(
    config: ViTConfig, n_samples: int, seed: int, out_path: str
) -> AnalysisBundle:
    """Generate a seeded end-to-end test bundle with the toy ViT.

    Random images go through a seeded random-weight model; CLS attention
    and occlusion attribution (against the predicted class) are recorded.
    Labels are set to the model's own predictions so accuracy-based curves
    start at 1.0, and the generating model is saved under <out>/model so
    scorer-dependent analyses can reload it later.
    """
    rng = np.random.default_rng(seed)
    model = init_model(config)
    w, h, c = config.image_size
    images = rng.random((n_samples, w, h, c))

    attention = np.empty((n_samples, config.n_layers, config.n_heads, config.n_patches))
    attribution = np.empty((n_samples, config.n_patches))
    predictions = np.empty(n_samples, dtype=np.int64)
    for i in range(n_samples):
        result = forward(model, images[i])
        predictions[i] = int(np.argmax(result.scores))
        attention[i] = extract_cls_attention(result.attention)
        attribution[i] = occlusion_attribution(
            model, images[i], int(predictions[i]), baseline_value=0.0
        ).values

    bundle = AnalysisBundle(
        attention=attention,
        attribution=attribution,
        labels=predictions.copy(),
        predictions=predictions,
        class_names=[f"class{k}" for k in range(config.n_classes)],
        images=images,
        attribution_method="occlusion",
        checkpoint_tag=f"synth-seed{seed}",
        patch_size=config.patch_size,
    )
    save_bundle(bundle, out_path)
    save_model(model, os.path.join(out_path, "model"))
    return bundle


def _scorer_path(spec: ReportSpec, bundle_path: str) -> str:
    return spec.model_path or os.path.join(bundle_path, "model")


def _load_scorer(spec: ReportSpec, bundle_path: str) -> ViTModel:
    return load_model(_scorer_path(spec, bundle_path))


def _skippable(spec: ReportSpec, analysis: str, bundle: AnalysisBundle, bundle_path: str) -> str | None:
    """In skip_unavailable mode, the reason an analysis cannot run, or None."""
    if not spec.skip_unavailable:
        return None
    if analysis in ("mask-curve", "perturb"):
        if bundle.images is None:
            return "bundle has no images array"
        if not os.path.isfile(os.path.join(_scorer_path(spec, bundle_path), "manifest.json")):
            return f"no scorer model at {_scorer_path(spec, bundle_path)} (use --model)"
    if analysis == "embed" and bundle.n_samples < 4:
        return "fewer than 4 samples"
    return None


def _emit_iav(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    mode = spec.label_mode_for("iav")
    classes = bundle.predictions if mode == "predicted" else bundle.labels
    header = ["sample", "class"] + [
        f"l{layer}h{head}"
        for layer in range(bundle.n_layers)
        for head in range(bundle.n_heads)
    ]
    rows = []
    for i in range(bundle.n_samples):
        vec = iav(bundle, i, int(classes[i]))
        rows.append([i, int(classes[i])] + [float(s) for s in vec.scores])
    write_csv_atomic(os.path.join(out, "iav.csv"), header, rows)


def _emit_global_iav(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    result = global_iav(bundle, spec.label_mode_for("global-iav"))
    rows = _head_rows(result.scores, bundle.n_layers, bundle.n_heads)
    write_csv_atomic(os.path.join(out, "global_iav.csv"), ["l", "h", "score"], rows)
    if spec.figures:
        grid = _score_grid(result.scores, bundle.n_layers, bundle.n_heads)
        svg = figures.heatmap_svg(
            grid, title="global IAV per head", sort_rows_desc=spec.sort_heads
        )
        write_text_atomic(os.path.join(out, "global_iav.svg"), svg)


def _emit_aav(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    if spec.baseline_path is None:
        raise InvalidConfigError("aav needs --baseline <path to .npy map>")
    baseline = np.load(spec.baseline_path)
    result = aav(bundle, baseline, spec.label_mode_for("aav"),
                 baseline_tag=os.path.basename(spec.baseline_path))
    rows = _head_rows(result.scores, bundle.n_layers, bundle.n_heads)
    write_csv_atomic(os.path.join(out, "aav.csv"), ["l", "h", "score"], rows)
    if spec.figures:
        grid = _score_grid(result.scores, bundle.n_layers, bundle.n_heads)
        svg = figures.heatmap_svg(
            grid,
            title=f"AAV per head ({result.baseline_tag})",
            sort_rows_desc=spec.sort_heads,
        )
        write_text_atomic(os.path.join(out, "aav.svg"), svg)


def _emit_entropy(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    profile = entropy_profile(bundle)
    rows = []
    boxes = []
    for layer in range(bundle.n_layers):
        for head in range(bundle.n_heads):
            rows.append(
                [layer, head,
                 float(profile.mean[layer, head]), float(profile.median[layer, head]),
                 float(profile.q1[layer, head]), float(profile.q3[layer, head]),
                 float(profile.vmin[layer, head]), float(profile.vmax[layer, head])]
            )
            boxes.append(
                {"label": f"L{layer}H{head}",
                 "q1": profile.q1[layer, head], "median": profile.median[layer, head],
                 "q3": profile.q3[layer, head], "min": profile.vmin[layer, head],
                 "max": profile.vmax[layer, head]}
            )
    write_csv_atomic(
        os.path.join(out, "entropy.csv"),
        ["l", "h", "mean", "median", "q1", "q3", "min", "max"],
        rows,
    )
    if spec.figures:
        svg = figures.boxplot_svg(boxes, title="attention entropy per head")
        write_text_atomic(os.path.join(out, "entropy_box.svg"), svg)


def _emit_heads(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    profiles = classify_heads(bundle)
    write_head_profiles_csv(profiles, os.path.join(out, "heads.csv"))
    write_head_profiles_json(profiles, os.path.join(out, "heads.json"))
    if spec.figures:
        boxes = [
            {"label": f"L{p.layer}H{p.head}", "q1": p.q1, "median": p.median,
             "q3": p.q3, "min": p.vmin, "max": p.vmax}
            for p in profiles
        ]
        svg = figures.boxplot_svg(boxes, title="IA-Score per head", y_min=0.0, y_max=1.0)
        write_text_atomic(os.path.join(out, "heads_box.svg"), svg)


def _mask_policies(spec: ReportSpec, bundle: AnalysisBundle) -> list[MaskingPolicy]:
    if spec.mask_source != "all":
        return [
            MaskingPolicy(
                source=spec.mask_source, fill=spec.mask_fill, seed=spec.seed,
                layer=spec.mask_layer, head=spec.mask_head,
            )
        ]
    return [
        MaskingPolicy(source="attention_mean", fill=spec.mask_fill),
        MaskingPolicy(source="attribution", fill=spec.mask_fill),
        MaskingPolicy(source="random", fill=spec.mask_fill, seed=spec.seed),
    ]


def _emit_mask_curve(spec: ReportSpec, bundle: AnalysisBundle, bundle_path: str, out: str) -> None:
    model = _load_scorer(spec, bundle_path)
    scorer = lambda image: forward(model, image).scores  # noqa: E731
    rows = []
    series = []
    for policy in _mask_policies(spec, bundle):
        curve = masking_curve(bundle, scorer, policy, spec.ratios)
        name = policy.source
        if policy.source == "attention_head":
            name = f"attention_l{policy.layer}h{policy.head}"
        rows += [[name, ratio, acc] for ratio, acc in curve]
        series.append((name, [r for r, _ in curve], [a for _, a in curve]))
    write_csv_atomic(
        os.path.join(out, "mask_curve.csv"), ["source", "ratio", "accuracy"], rows
    )
    if spec.figures:
        svg = figures.line_chart_svg(series, title="accuracy vs masking ratio")
        write_text_atomic(os.path.join(out, "mask_curve.svg"), svg)


def _emit_perturb(spec: ReportSpec, bundle: AnalysisBundle, bundle_path: str, out: str) -> None:
    model = _load_scorer(spec, bundle_path)
    scorer = lambda image: forward(model, image).scores  # noqa: E731
    blur = blur_curve(bundle, scorer, spec.blur_sigmas)
    write_csv_atomic(
        os.path.join(out, "perturb_blur.csv"),
        ["sigma", "accuracy"],
        [[sigma, acc] for sigma, acc in blur],
    )
    jig = jigsaw_curve(bundle, scorer, spec.jigsaw_grid, spec.jigsaw_swaps, seed=spec.seed)
    write_csv_atomic(
        os.path.join(out, "perturb_jigsaw.csv"),
        ["grid", "swaps", "accuracy"],
        [[spec.jigsaw_grid, k, acc] for k, acc in jig],
    )
    if spec.figures:
        svg = figures.line_chart_svg(
            [("blur", [s for s, _ in blur], [a for _, a in blur])],
            title="accuracy vs blur sigma",
        )
        write_text_atomic(os.path.join(out, "perturb_blur.svg"), svg)
        svg = figures.line_chart_svg(
            [(f"jigsaw g={spec.jigsaw_grid}", [float(k) for k, _ in jig], [a for _, a in jig])],
            title="accuracy vs jigsaw swaps",
        )
        write_text_atomic(os.path.join(out, "perturb_jigsaw.svg"), svg)


def _emit_embed(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    mode = spec.label_mode_for("embed")
    classes = bundle.predictions if mode == "predicted" else bundle.labels
    iavs = [iav(bundle, i, int(classes[i])) for i in range(bundle.n_samples)]
    layer = spec.embed_layer if spec.embed_layer is not None else bundle.n_layers - 1
    points = layer_slice(iavs, layer, bundle.n_heads)
    coords = tsne(points, TsneConfig(seed=spec.seed))
    rows = [
        [i, int(bundle.labels[i]), int(bundle.predictions[i]), layer,
         float(coords[i, 0]), float(coords[i, 1])]
        for i in range(bundle.n_samples)
    ]
    write_csv_atomic(
        os.path.join(out, "embed.csv"),
        ["sample_index", "label", "prediction", "layer", "x", "y"],
        rows,
    )
    if spec.figures:
        svg = figures.scatter_svg(
            coords, bundle.labels, title=f"t-SNE of layer {layer} agreement vectors"
        )
        write_text_atomic(os.path.join(out, "embed.svg"), svg)


def _emit_diff(spec: ReportSpec, bundle: AnalysisBundle, out: str) -> None:
    if spec.final_bundle is None:
        raise InvalidConfigError("diff needs --final <reference bundle path>")
    final = load_bundle(spec.final_bundle)
    rows = [
        ["attribution", checkpoint_diff(bundle, final, "attribution")],
        ["attention", checkpoint_diff(bundle, final, "attention")],
    ]
    write_csv_atomic(os.path.join(out, "diff.csv"), ["target", "distance"], rows)


def run(spec: ReportSpec) -> int:
    """Run the selected analyses on every bundle; 0 on success.

    On any toolkit error the diagnostic names the failing analysis and
    bundle path on stderr and the exit code is 1. Outputs for bundle k go
    to <out>/ directly when there is a single bundle, else <out>/bundle<k>.
    """
    try:
        os.makedirs(spec.out_dir, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create output directory {spec.out_dir}: {e}", file=sys.stderr)
        return 1

    for index, bundle_path in enumerate(spec.bundles):
        out = spec.out_dir
        if len(spec.bundles) > 1:
            out = os.path.join(spec.out_dir, f"bundle{index}")
            os.makedirs(out, exist_ok=True)
        current = "load"
        try:
            bundle = load_bundle(bundle_path)
            for analysis in spec.analyses:
                current = analysis
                reason = _skippable(spec, analysis, bundle, bundle_path)
                if reason is not None:
                    print(
                        f"note: skipping {analysis} on {bundle_path}: {reason}",
                        file=sys.stderr,
                    )
                    continue
                if analysis == "iav":
                    _emit_iav(spec, bundle, out)
                elif analysis == "global-iav":
                    _emit_global_iav(spec, bundle, out)
                elif analysis == "aav":
                    _emit_aav(spec, bundle, out)
                elif analysis == "entropy":
                    _emit_entropy(spec, bundle, out)
                elif analysis == "heads":
                    _emit_heads(spec, bundle, out)
                elif analysis == "mask-curve":
                    _emit_mask_curve(spec, bundle, bundle_path, out)
                elif analysis == "perturb":
                    _emit_perturb(spec, bundle, bundle_path, out)
                elif analysis == "embed":
                    _emit_embed(spec, bundle, out)
                elif analysis == "diff":
                    _emit_diff(spec, bundle, out)
        except (IavkitError, OSError, ValueError) as e:
            print(
                f"error: {current} failed on bundle {bundle_path}: {e}",
                file=sys.stderr,
            )
            return 1
    return 0
