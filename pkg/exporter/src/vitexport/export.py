"""Export orchestration: model + dataset -> analysis bundle directory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .attribution import gradcam, smoothgrad
from .errors import DatasetUnavailableError, OutOfMemoryError
from .models import (
    AttentionRecorder,
    ModelBundle,
    cls_attention_over_patches,
    load_model,
    stacked_attention,
)
from .writer import write_bundle


@dataclass
class ExportConfig:
    model: str = "tiny"
    dataset: str = "synthetic"
    n_samples: int = 8
    method: str = "smoothgrad"                # "smoothgrad" | "gradcam"
    target_class: str = "predicted"           # "predicted" | "ground_truth"
    out_path: str = "bundle"
    seed: int = 0
    device: str = "cpu"
    batch_size: int = 8
    smoothgrad_samples: int = 25
    smoothgrad_noise_std: float = 0.15
    pretrained: bool = False
    checkpoint_tag: str = "export"
    store_images: bool = True

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.method not in ("smoothgrad", "gradcam"):
            raise ValueError(f"method must be smoothgrad or gradcam, got {self.method!r}")
        if self.target_class not in ("predicted", "ground_truth"):
            raise ValueError(f"bad target_class {self.target_class!r}")
        if self.method == "smoothgrad":
            if self.smoothgrad_samples < 1:
                raise ValueError("smoothgrad needs n_samples >= 1")
            if self.smoothgrad_noise_std <= 0:
                raise ValueError("smoothgrad needs noise_std > 0")


def load_dataset(config: ExportConfig, model: ModelBundle) -> tuple[torch.Tensor, torch.Tensor]:
    """Images [N, C, S, S] in [0, 1] and int labels [N] for the model."""
    name = config.dataset
    if name == "synthetic":
        generator = torch.Generator().manual_seed(config.seed)
        images = torch.rand(
            (config.n_samples, model.channels, model.image_size, model.image_size),
            generator=generator,
        )
        labels = torch.randint(
            0, model.n_classes, (config.n_samples,), generator=generator
        )
        return images, labels
    if name.startswith("cifar10"):
        root = name.split(":", 1)[1] if ":" in name else "./data"
        try:
            from torchvision import datasets, transforms

            transform = transforms.Compose(
                [transforms.Resize(model.image_size), transforms.ToTensor()]
            )
            data = datasets.CIFAR10(root, train=False, download=False, transform=transform)
        except Exception as e:
            raise DatasetUnavailableError(
                f"CIFAR-10 not available under {root!r}: {e}"
            ) from e
        if len(data) < config.n_samples:
            raise DatasetUnavailableError(
                f"dataset has {len(data)} samples, {config.n_samples} requested"
            )
        images = torch.stack([data[i][0] for i in range(config.n_samples)])
        labels = torch.tensor([data[i][1] for i in range(config.n_samples)])
        return images, labels
    raise DatasetUnavailableError(
        f"unknown dataset {config.dataset!r}; use 'synthetic' or 'cifar10[:root]'"
    )


def export(config: ExportConfig) -> str:
    """Run the export and return the bundle directory path.

    Deterministic given model weights, the sample list, and the seed: the
    SmoothGrad noise generator is seeded, inference runs in eval mode.
    """
    model = load_model(config.model, pretrained=config.pretrained)
    device = torch.device(config.device)
    model.model.to(device)
    images, labels = load_dataset(config, model)
    images = images.to(device)

    n = config.n_samples
    recorder = AttentionRecorder().attach(model.model)
    attention_rows = []
    predictions = torch.empty(n, dtype=torch.int64)
    try:
        with torch.no_grad():
            for start in range(0, n, config.batch_size):
                batch = images[start : start + config.batch_size]
                recorder.clear()
                scores = model.model(batch)
                predictions[start : start + batch.shape[0]] = scores.argmax(dim=1)
                per_layer = stacked_attention(recorder)        # [B, L, H, T, T]
                attention_rows.append(cls_attention_over_patches(per_layer).cpu())
    except torch.cuda.OutOfMemoryError as e:
        raise OutOfMemoryError(
            f"attention pass ran out of memory at batch_size={config.batch_size}; "
            "re-run with a smaller --batch-size"
        ) from e
    finally:
        recorder.detach()
    attention = torch.cat(attention_rows).numpy().astype(np.float64)
    # Renormalize in float64: torch's float32 softmax leaves row sums ~1e-7
    # off 1, which would otherwise be re-fixed at every load.
    attention /= attention.sum(axis=-1, keepdims=True)

    targets = predictions if config.target_class == "predicted" else labels
    noise_generator = torch.Generator(device="cpu").manual_seed(config.seed)
    maps = []
    for i in range(n):
        model.model.zero_grad(set_to_none=True)
        if config.method == "smoothgrad":
            heat = smoothgrad(
                model,
                images[i],
                int(targets[i]),
                n_samples=config.smoothgrad_samples,
                noise_std=config.smoothgrad_noise_std,
                generator=noise_generator,
            )
        else:
            heat = gradcam(model, images[i], int(targets[i]))
        maps.append(heat.detach().cpu().numpy().astype(np.float64))
    attribution = np.stack(maps)

    write_bundle(
        config.out_path,
        attention=attention,
        attribution=attribution,
        labels=labels.numpy().astype(np.int64),
        predictions=predictions.numpy().astype(np.int64),
        class_names=model.class_names,
        attribution_method=config.method,
        checkpoint_tag=config.checkpoint_tag,
        patch_size=model.patch_size,
        images=(
            images.cpu().permute(0, 2, 3, 1).numpy().astype(np.float64)
            if config.store_images
            else None
        ),
    )
    return config.out_path
