"""CLI: export real-model attention and attribution into bundle directories."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import ExportConfig, export


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitexport",
        description="Export per-head ViT attention plus gradient attribution "
        "as an analysis bundle directory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="run one export")
    ex.add_argument("--model", default="tiny",
                    help="'tiny', 'torchvision-tiny', or a torchvision name like vit_b_16")
    ex.add_argument("--dataset", default="synthetic", help="'synthetic' or 'cifar10[:root]'")
    ex.add_argument("--n", type=int, default=8, help="number of samples")
    ex.add_argument("--method", choices=["smoothgrad", "gradcam"], default="smoothgrad")
    ex.add_argument("--target-class", choices=["predicted", "ground_truth"],
                    default="predicted")
    ex.add_argument("--out", required=True, help="bundle directory to write")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--device", default="cpu")
    ex.add_argument("--batch-size", type=int, default=8)
    ex.add_argument("--smoothgrad-samples", type=int, default=25)
    ex.add_argument("--smoothgrad-noise", type=float, default=0.15,
                    help="noise std as a fraction of the input range")
    ex.add_argument("--pretrained", action="store_true",
                    help="fetch pretrained torchvision weights (needs network)")
    ex.add_argument("--tag", default="export", help="checkpoint tag for the manifest")
    ex.add_argument("--no-images", action="store_true", help="skip the images array")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config = ExportConfig(
        model=args.model,
        dataset=args.dataset,
        n_samples=args.n,
        method=args.method,
        target_class=args.target_class,
        out_path=args.out,
        seed=args.seed,
        device=args.device,
        batch_size=args.batch_size,
        smoothgrad_samples=args.smoothgrad_samples,
        smoothgrad_noise_std=args.smoothgrad_noise,
        pretrained=args.pretrained,
        checkpoint_tag=args.tag,
        store_images=not args.no_images,
    )
    try:
        path = export(config)
    except (ExportError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote bundle: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
