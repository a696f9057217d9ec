"""Gradient-based attribution: SmoothGrad and GradCAM for ViT classifiers.

Both produce the non-negative heatmaps the downstream agreement analyses
assume: SmoothGrad averages absolute input gradients over noisy copies
(pixel resolution), GradCAM weighs the final token activations by their
pooled gradients and rectifies (patch resolution).
"""

from __future__ import annotations

import torch
from torch import nn

from .models import ModelBundle


def smoothgrad(
    bundle: ModelBundle,
    image: torch.Tensor,
    class_index: int,
    n_samples: int = 25,
    noise_std: float = 0.15,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Mean |d score_c / d input| over noisy copies, averaged over channels.

    `image` is [C, H, W]; `noise_std` is a fraction of the image's value
    range. Returns a pixel-level [H, W] map, non-negative by construction.
    """
    value_range = float(image.max() - image.min())
    sigma = noise_std * value_range
    total = torch.zeros_like(image)
    for _ in range(n_samples):
        # Noise is drawn on CPU so the seeded generator works for any device.
        noise = torch.empty(image.shape, dtype=image.dtype).normal_(
            0.0, sigma if sigma > 0 else 1e-30, generator=generator
        ).to(image.device)
        noisy = (image + noise).unsqueeze(0).requires_grad_(True)
        scores = bundle.model(noisy)
        scores[0, class_index].backward()
        total += noisy.grad[0].abs()
    return (total / n_samples).mean(dim=0)


def gradcam(
    bundle: ModelBundle,
    image: torch.Tensor,
    class_index: int,
) -> torch.Tensor:
    """Token-space GradCAM on the last block's pre-attention layer norm:
    a patch-level [P] map.

    Channel weights are the gradients pooled over patch tokens; the weighted
    activation sum is rectified, so the map is non-negative. The target
    layer sits inside the last encoder block because later activations
    (final layer norm onward) feed the classifier through the CLS row only,
    leaving patch tokens with zero gradient.
    """
    captured: dict[str, torch.Tensor] = {}

    def forward_hook(module: nn.Module, inputs, output):
        captured["activations"] = output
        output.register_hook(lambda grad: captured.__setitem__("gradients", grad))

    handle = bundle.cam_layer.register_forward_hook(forward_hook)
    try:
        scores = bundle.model(image.unsqueeze(0))
        scores[0, class_index].backward()
    finally:
        handle.remove()

    activations = captured["activations"][0, 1:]   # [P, D], CLS dropped
    gradients = captured["gradients"][0, 1:]
    weights = gradients.mean(dim=0)                # pooled over patch tokens
    cam = torch.relu(activations @ weights)
    return cam.detach()
