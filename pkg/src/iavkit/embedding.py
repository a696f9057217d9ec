"""Exact t-SNE for per-layer agreement-vector slices.

Desk-scale inputs (N up to a few thousand) make the exact O(N^2) algorithm
both affordable and auditable: pairwise squared distances, a per-point
precision found by binary search so every conditional distribution hits
the requested perplexity, symmetrized joint probabilities, then gradient
descent with momentum and per-parameter gains on KL(P || Q) against a
Student-t Q. No tree approximations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, ShapeMismatchError, TooFewPointsError
from .metrics import IavVector
from .tensorops import as_tensor

_DUPLICATE_JITTER = 1e-10
_MIN_GAIN = 0.01


@dataclass
class TsneConfig:
    perplexity: float = 30.0          # auto-capped at (N - 1) / 3
    n_iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0  # applied for the first 250 iterations
    exaggeration_iters: int = 250
    seed: int = 0
    init: str = "pca"                 # "pca" | "random"

    def __post_init__(self):
        if self.perplexity < 1:
            raise ValueError(f"perplexity must be >= 1, got {self.perplexity}")
        if self.n_iterations < self.exaggeration_iters:
            raise ValueError(
                f"n_iterations must be >= {self.exaggeration_iters}, got {self.n_iterations}"
            )
        if self.init not in ("pca", "random"):
            raise ValueError(f"init must be 'pca' or 'random', got {self.init!r}")


@dataclass
class TsneDiagnostics:
    effective_perplexity: float
    perplexity_capped: bool
    perplexity_max_error: float      # max |achieved - requested| over points
    kl_after_exaggeration: float     # KL(P || Q) when exaggeration is removed
    kl_final: float
    joint_sum: float                 # total mass of the symmetrized P


def layer_slice(iavs: list[IavVector], layer: int, n_heads: int) -> np.ndarray:
    """Rows of each sample's head scores at one layer: an [N, H] matrix.

    The number of heads per layer is not recoverable from a flat agreement
    vector, so it is passed explicitly; concatenating the slices for all
    layers reconstructs the full [N, L*H] matrix.
    """
    if not iavs:
        raise TooFewPointsError("no agreement vectors given")
    length = iavs[0].scores.shape[0]
    if any(v.scores.shape != (length,) for v in iavs):
        raise ShapeMismatchError("agreement vectors have inconsistent lengths")
    if length % n_heads:
        raise ShapeMismatchError(f"vector length {length} not divisible by {n_heads} heads")
    n_layers = length // n_heads
    if not 0 <= layer < n_layers:
        raise IndexOutOfRangeError(f"layer {layer} not in [0, {n_layers})")
    return np.stack([v.scores[layer * n_heads : (layer + 1) * n_heads] for v in iavs])


def _pairwise_sq_distances(x: np.ndarray, jitter_duplicates: bool = False) -> np.ndarray:
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    if jitter_duplicates:
        dup = d2 == 0.0
        np.fill_diagonal(dup, False)
        if dup.any():
            # Deterministic jitter keyed on the larger row index breaks
            # zero-distance singularities between duplicate rows.
            for i, j in np.argwhere(np.triu(dup)):
                d2[i, j] = d2[j, i] = _DUPLICATE_JITTER * max(i, j)
    return d2


def conditional_probabilities(
    d2: np.ndarray,
    perplexity: float,
    entropy_tol: float = 1e-5,
    max_steps: int = 50,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian conditional distributions with per-point precision search.

    For each point i, bisect the precision beta so the Shannon entropy of
    p(.|i) matches log(perplexity) within entropy_tol (at most max_steps
    bisections). Returns the row-stochastic conditional matrix (zero
    diagonal) and the precisions.
    """
    n = d2.shape[0]
    target = np.log(perplexity)
    cond = np.zeros((n, n))
    betas = np.ones(n)
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        di = d2[i][others[i]]
        # Shift by the nearest neighbor so the largest weight is exp(0):
        # the conditionals are shift-invariant and nothing can underflow.
        shifted = di - di.min()
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        for _ in range(max_steps):
            w = np.exp(-shifted * beta)
            sw = float(w.sum())
            pi = w / sw
            entropy = np.log(sw) + beta * float((shifted * pi).sum())
            diff = entropy - target
            if abs(diff) <= entropy_tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == 0.0 else (beta + beta_min) / 2.0
        cond[i][others[i]] = pi
        betas[i] = beta
    return cond, betas


def joint_probabilities(cond: np.ndarray) -> np.ndarray:
    """Symmetrize conditionals to p_ij = (p_j|i + p_i|j) / 2N, total mass 1."""
    n = cond.shape[0]
    return (cond + cond.T) / (2.0 * n)


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / np.maximum(q[mask], 1e-300))).sum())


def _student_t_q(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = 1.0 / (1.0 + _pairwise_sq_distances(y))
    np.fill_diagonal(w, 0.0)
    return w / w.sum(), w


def _pca_init(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    centered = x - x.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    k = min(2, vt.shape[0])
    # Fix SVD sign ambiguity: largest-magnitude loading of each component > 0.
    signs = np.sign(vt[range(k), np.argmax(np.abs(vt[:k]), axis=1)])
    signs[signs == 0] = 1.0
    y = np.zeros((x.shape[0], 2))
    y[:, :k] = u[:, :k] * s[:k] * signs
    spread = y[:, 0].std()
    if spread == 0.0:
        return rng.normal(0.0, 1e-4, size=(x.shape[0], 2))
    return y / spread * 1e-4


def tsne(points, config: TsneConfig | None = None, return_diagnostics: bool = False):
    """Embed [N, D] points into 2-D. Deterministic for a fixed seed.

    Early exaggeration multiplies P for the first exaggeration_iters
    iterations with momentum 0.5; afterwards plain P with momentum 0.8.
    Per-parameter gains (+0.2 on sign change, x0.8 otherwise, floored at
    0.01) follow the standard reference optimizer.
    """
    if config is None:
        config = TsneConfig()
    x = as_tensor(points)
    if x.ndim != 2:
        raise ShapeMismatchError(f"points must be [N, D], got {x.shape}")
    n = x.shape[0]
    if n < 4:
        raise TooFewPointsError(f"t-SNE needs at least 4 points, got {n}")

    capped_perplexity = min(config.perplexity, (n - 1) / 3.0)
    d2 = _pairwise_sq_distances(x, jitter_duplicates=True)
    cond, _ = conditional_probabilities(d2, capped_perplexity)

    # Achieved perplexity per point, for the diagnostics contract.
    row_entropy = np.array(
        [-(r[r > 0] * np.log(r[r > 0])).sum() for r in cond]
    )
    perp_error = float(np.abs(np.exp(row_entropy) - capped_perplexity).max())

    p = joint_probabilities(cond)
    rng = np.random.default_rng(config.seed)
    if config.init == "pca":
        y = _pca_init(x, rng)
    else:
        y = rng.normal(0.0, 1e-4, size=(n, 2))

    update = np.zeros_like(y)
    gains = np.ones_like(y)
    p_run = p * config.early_exaggeration
    momentum = 0.5
    kl_after_exaggeration = np.nan

    for it in range(config.n_iterations):
        if it == config.exaggeration_iters:
            p_run = p
            momentum = 0.8
            q, _ = _student_t_q(y)
            kl_after_exaggeration = _kl_divergence(p, q)

        q, w = _student_t_q(y)
        pq = (p_run - q) * w
        grad = 4.0 * (y * pq.sum(axis=1)[:, None] - pq @ y)

        flipped = (update * grad) < 0.0
        gains[flipped] += 0.2
        gains[~flipped] *= 0.8
        np.maximum(gains, _MIN_GAIN, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)

    q, _ = _student_t_q(y)
    kl_final = _kl_divergence(p, q)

    if not return_diagnostics:
        return y
    diagnostics = TsneDiagnostics(
        effective_perplexity=capped_perplexity,
        perplexity_capped=capped_perplexity < config.perplexity,
        perplexity_max_error=perp_error,
        kl_after_exaggeration=float(kl_after_exaggeration),
        kl_final=kl_final,
        joint_sum=float(p.sum()),
    )
    return y, diagnostics
