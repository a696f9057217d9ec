"""Attention spread and head roles: entropy profiles and high/low typing.

Entropy measures how widely a head spreads its attention (ln P = uniform,
0 = one-hot) but is blind to WHERE the mass sits; the IA-Score median
classifies heads by whether they track the attribution. This demo
contrasts the two on hand-built attention patterns.

Run:  python demos/02_entropy_and_head_roles.py
"""

import numpy as np

from iavkit import AnalysisBundle, attention_entropy, classify_heads, entropy_profile

rng = np.random.default_rng(0)
n_samples, n_patches = 12, 16

# Head 0: focused exactly on the attribution's support (agreeing, low entropy).
# Head 1: uniform everywhere (high entropy, mediocre agreement).
# Head 2: focused on a single patch the attribution ignores (disagreeing).
attribution = np.zeros((n_samples, n_patches))
attribution[:, :4] = rng.random((n_samples, 4)) + 0.5

attention = np.zeros((n_samples, 1, 3, n_patches))
support = attribution / attribution.sum(axis=1, keepdims=True)
attention[:, 0, 0, :] = support
attention[:, 0, 1, :] = 1.0 / n_patches
attention[:, 0, 2, -1] = 1.0

bundle = AnalysisBundle(
    attention=attention,
    attribution=attribution,
    labels=np.zeros(n_samples, dtype=np.int64),
    predictions=np.zeros(n_samples, dtype=np.int64),
    class_names=["only"],
)

print("single-row entropies:")
print(f"  one-hot: {attention_entropy(attention[0, 0, 2]):.4f}  (min = 0)")
print(f"  uniform: {attention_entropy(attention[0, 0, 1]):.4f}  (max = ln 16 = {np.log(16):.4f})")

profile = entropy_profile(bundle)
print("\nper-head mean entropy:", np.round(profile.mean[0], 4))

print("\nhead profiles (median IA-Score over samples decides the type):")
for p in classify_heads(bundle):
    print(f"  L{p.layer}H{p.head}: median={p.median:.3f} "
          f"iqr=[{p.q1:.3f}, {p.q3:.3f}] entropy={p.mean_entropy:.3f} -> {p.head_type}")

print("\nnote how head 1 (uniform) and head 0 (agreeing) have very different "
      "entropies, while entropy alone says nothing about head 2 vs head 0: "
      "both are sharp, only one looks where the attribution looks.")
