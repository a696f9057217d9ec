"""Saliency-guided masking: does deleting what a head looks at hurt accuracy?

The toy dataset plants class evidence in the pixels: class k brightens
quadrant k of the image, and the scorer reads quadrant brightness. Heads
attend to bright patches, so attention-guided masking deletes the evidence
first and accuracy collapses by ratio ~0.25 (one quadrant = 4 of 16
patches); the random control decays much more slowly.

Run:  python demos/03_masking_curves.py
"""

import numpy as np

from iavkit import AnalysisBundle, occlusion_attribution, softmax
from iavkit.perturb import MaskingPolicy, masking_curve


def quadrant_scorer(image):
    """Class score = mean brightness of the class's quadrant."""
    half = image.shape[0] // 2
    return np.array([
        image[:half, :half].mean(), image[:half, half:].mean(),
        image[half:, :half].mean(), image[half:, half:].mean(),
    ])


def patch_means(image, patch_size=4):
    nr = image.shape[0] // patch_size
    return image.reshape(nr, patch_size, nr, patch_size, -1).mean(axis=(1, 3, 4)).ravel()


rng = np.random.default_rng(0)
n_per_class, n_classes, side = 12, 4, 16
n = n_per_class * n_classes
labels = np.tile(np.arange(n_classes), n_per_class)

images = 0.4 * rng.random((n, side, side, 1))
for i in range(n):
    r, c = divmod(int(labels[i]), 2)
    images[i, r * 8 : (r + 1) * 8, c * 8 : (c + 1) * 8] += 0.6

# Two "heads" that both seek bright patches, at different sharpness.
attention = np.stack(
    [
        np.stack([softmax(8.0 * patch_means(img)), softmax(16.0 * patch_means(img))])
        for img in images
    ]
)[:, None, :, :]  # [N, L=1, H=2, P=16]

attribution = np.stack(
    [
        occlusion_attribution(quadrant_scorer, images[i], int(labels[i]), patch_size=4).values
        for i in range(n)
    ]
)

bundle = AnalysisBundle(
    attention=attention,
    attribution=attribution,
    labels=labels.astype(np.int64),
    predictions=labels.astype(np.int64),
    class_names=[f"quadrant{k}" for k in range(n_classes)],
    images=images,
)

ratios = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]
policies = [
    MaskingPolicy(source="attention_mean"),
    MaskingPolicy(source="attribution"),
    MaskingPolicy(source="random", seed=13),
]

curves = [masking_curve(bundle, quadrant_scorer, policy, ratios) for policy in policies]
print(f"{'ratio':>6} | " + " | ".join(f"{p.source:>14}" for p in policies))
for k, ratio in enumerate(ratios):
    row = " | ".join(f"{curves[j][k][1]:>14.3f}" for j in range(len(policies)))
    print(f"{ratio:>6.1f} | {row}")

print("\nratio 0 reproduces the clean accuracy exactly; saliency-guided masking "
      "needs only ~25% of patches (one quadrant) to destroy the evidence, while "
      "random masking keeps accuracy above chance far longer.")
