"""Command-line front end.

Each subcommand maps to one analysis (or the full report); outputs are CSV
and JSON tables plus optional SVG figures in the --out directory. Run
`iavkit <subcommand> --help` for per-command flags.
"""

from __future__ import annotations

import argparse
import sys

from .bundle import load_bundle
from .errors import IavkitError
from .report import (
    DEFAULT_BLUR_SIGMAS,
    DEFAULT_JIGSAW_SWAPS,
    DEFAULT_RATIOS,
    ReportSpec,
    make_synthetic_bundle,
    run,
)
from .vit import ViTConfig


def _add_common(parser: argparse.ArgumentParser, bundles: bool = True) -> None:
    if bundles:
        parser.add_argument(
            "--bundle", action="append", required=True, dest="bundles",
            metavar="DIR", help="bundle directory (repeatable)",
        )
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=0, help="seed for stochastic steps")
    parser.add_argument(
        "--labels", choices=["predicted", "ground-truth"], default=None,
        help="class per sample: model prediction or ground-truth label",
    )
    parser.add_argument("--figures", action="store_true", help="also write SVG figures")


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v != "")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iavkit",
        description="Attention/attribution agreement analyses over bundle directories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic bundle with the toy ViT")
    synth.add_argument("--out", required=True, help="bundle directory to create")
    synth.add_argument("--n", type=int, default=16, help="number of samples")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--image-size", default="16,16,1", metavar="W,H,C")
    synth.add_argument("--patch-size", type=int, default=4)
    synth.add_argument("--layers", type=int, default=2)
    synth.add_argument("--heads", type=int, default=2)
    synth.add_argument("--dim", type=int, default=16)
    synth.add_argument("--classes", type=int, default=4)
    synth.add_argument("--model-seed", type=int, default=None,
                       help="model weight seed (default: --seed)")

    validate = sub.add_parser("validate", help="load a bundle and report fix-ups")
    validate.add_argument("--bundle", action="append", required=True, dest="bundles")

    for name in ("iav", "global-iav", "entropy", "heads", "embed"):
        p = sub.add_parser(name, help=f"run the {name} analysis")
        _add_common(p)
        if name == "embed":
            p.add_argument("--layer", type=int, default=None,
                           help="layer to embed (default: last)")

    aav_cmd = sub.add_parser("aav", help="agreement with an external baseline map")
    _add_common(aav_cmd)
    aav_cmd.add_argument("--baseline", required=True,
                         help=".npy baseline map ([P], [W,H], [N,P] or [N,W,H])")

    mask = sub.add_parser("mask-curve", help="accuracy vs saliency-guided masking ratio")
    _add_common(mask)
    mask.add_argument("--ratios", type=_csv_floats, default=DEFAULT_RATIOS,
                      metavar="R1,R2,...")
    mask.add_argument(
        "--source", default="all",
        choices=["all", "attention_mean", "attention_head", "attribution", "random"],
    )
    mask.add_argument("--fill", type=float, default=0.0, help="mask fill value")
    mask.add_argument("--layer", type=int, default=None, help="for --source attention_head")
    mask.add_argument("--head", type=int, default=None, help="for --source attention_head")
    mask.add_argument("--model", default=None, help="scorer model dir (default: <bundle>/model)")

    perturb = sub.add_parser("perturb", help="accuracy under blur / jigsaw shifts")
    _add_common(perturb)
    perturb.add_argument("--blur", type=_csv_floats, default=DEFAULT_BLUR_SIGMAS,
                         metavar="S1,S2,...", help="blur sigmas")
    perturb.add_argument("--jigsaw", default=None, metavar="G,K1[,K2...]",
                         help="grid size followed by swap counts")
    perturb.add_argument("--model", default=None, help="scorer model dir (default: <bundle>/model)")

    diff = sub.add_parser("diff", help="heatmap distance between two checkpoints")
    _add_common(diff)
    diff.add_argument("--final", required=True, help="reference (final) bundle directory")

    report = sub.add_parser("report", help="run every applicable analysis")
    _add_common(report)
    report.add_argument("--baseline", default=None, help="enable aav with this .npy map")
    report.add_argument("--final", default=None, help="enable diff against this bundle")
    report.add_argument("--model", default=None, help="scorer model dir (default: <bundle>/model)")
    report.add_argument("--sort-heads", action="store_true",
                        help="sort heads within each layer in heatmap figures")

    return parser


def _spec_from_args(args: argparse.Namespace, analyses: list[str]) -> ReportSpec:
    label_mode = args.labels.replace("-", "_") if getattr(args, "labels", None) else None
    jigsaw_grid, jigsaw_swaps = 2, DEFAULT_JIGSAW_SWAPS
    if getattr(args, "jigsaw", None):
        parts = [int(v) for v in args.jigsaw.split(",") if v != ""]
        if len(parts) < 2:
            raise IavkitError("--jigsaw needs a grid size and at least one swap count")
        jigsaw_grid, jigsaw_swaps = parts[0], tuple(parts[1:])
    return ReportSpec(
        bundles=args.bundles,
        analyses=analyses,
        out_dir=args.out,
        figures=getattr(args, "figures", False),
        seed=args.seed,
        label_mode=label_mode,
        ratios=getattr(args, "ratios", DEFAULT_RATIOS),
        mask_source=getattr(args, "source", "all"),
        mask_fill=getattr(args, "fill", 0.0),
        mask_layer=getattr(args, "layer", None) if "mask-curve" in analyses else None,
        mask_head=getattr(args, "head", None),
        blur_sigmas=getattr(args, "blur", DEFAULT_BLUR_SIGMAS),
        jigsaw_grid=jigsaw_grid,
        jigsaw_swaps=jigsaw_swaps,
        embed_layer=getattr(args, "layer", None) if "embed" in analyses else None,
        baseline_path=getattr(args, "baseline", None),
        final_bundle=getattr(args, "final", None),
        model_path=getattr(args, "model", None),
        sort_heads=getattr(args, "sort_heads", False),
        skip_unavailable=args.command == "report",
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    dims = tuple(int(v) for v in args.image_size.split(","))
    if len(dims) != 3:
        print("error: --image-size must be W,H,C", file=sys.stderr)
        return 1
    config = ViTConfig(
        image_size=dims,
        patch_size=args.patch_size,
        n_layers=args.layers,
        n_heads=args.heads,
        embed_dim=args.dim,
        n_classes=args.classes,
        rng_seed=args.model_seed if args.model_seed is not None else args.seed,
    )
    bundle = make_synthetic_bundle(config, args.n, args.seed, args.out)
    print(
        f"wrote bundle: {args.out} "
        f"(N={bundle.n_samples}, L={bundle.n_layers}, H={bundle.n_heads}, "
        f"P={bundle.n_patches})"
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    for path in args.bundles:
        bundle = load_bundle(path)
        report = bundle.load_report
        print(
            f"{path}: ok "
            f"(N={bundle.n_samples}, L={bundle.n_layers}, H={bundle.n_heads}, "
            f"P={bundle.n_patches}; "
            f"clamped={report.clamped_negative_attribution}, "
            f"renormalized_rows={report.renormalized_attention_rows}, "
            f"pooled={report.pooled_pixel_attribution})"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "report":
            analyses = ["iav", "global-iav", "entropy", "heads", "mask-curve",
                        "perturb", "embed"]
            if args.baseline:
                analyses.append("aav")
            if args.final:
                analyses.append("diff")
            return run(_spec_from_args(args, analyses))
        return run(_spec_from_args(args, [args.command]))
    except (IavkitError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
