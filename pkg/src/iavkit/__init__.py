"""Agreement analysis between transformer attention maps and input-attribution.

The package measures, per attention head, how closely the CLS attention
over image patches tracks a class-specific input-attribution heatmap
(IA-Score), aggregates the scores into per-sample and global agreement
vectors (IAV / AAV), and ships the companion analyses: attention entropy
profiles, high/low head typing, checkpoint drift, saliency-guided masking
and robustness curves, and t-SNE embeddings of per-layer agreement
vectors. A built-in forward-only toy ViT generates real attention maps so
everything runs end-to-end on synthetic data; real-model data arrives
through bundle directories.
"""

from .attribution import AttributionMap, occlusion_attribution, validate_external_attribution
from .bundle import AnalysisBundle, LoadReport, Manifest, load_bundle, save_bundle
from .embedding import TsneConfig, TsneDiagnostics, layer_slice, tsne
from .errors import IavkitError
from .metrics import (
    EntropyProfile,
    GlobalIav,
    HeadProfile,
    IavVector,
    aav,
    attention_entropy,
    checkpoint_diff,
    classify_heads,
    entropy_profile,
    global_iav,
    ia_score,
    iav,
)
from .perturb import (
    JigsawSpec,
    MaskingPolicy,
    blur_curve,
    gaussian_blur,
    jigsaw,
    jigsaw_curve,
    mask_image,
    masking_curve,
)
from .report import ReportSpec, make_synthetic_bundle, run
from .tensorops import cosine_similarity, l2_normalize, pool_to_patches, softmax
from .vit import (
    ViTConfig,
    ViTModel,
    extract_cls_attention,
    forward,
    init_model,
    load_model,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisBundle",
    "AttributionMap",
    "EntropyProfile",
    "GlobalIav",
    "HeadProfile",
    "IavVector",
    "IavkitError",
    "JigsawSpec",
    "LoadReport",
    "Manifest",
    "MaskingPolicy",
    "ReportSpec",
    "TsneConfig",
    "TsneDiagnostics",
    "ViTConfig",
    "ViTModel",
    "aav",
    "attention_entropy",
    "blur_curve",
    "checkpoint_diff",
    "classify_heads",
    "cosine_similarity",
    "entropy_profile",
    "extract_cls_attention",
    "forward",
    "gaussian_blur",
    "global_iav",
    "ia_score",
    "iav",
    "init_model",
    "jigsaw",
    "jigsaw_curve",
    "l2_normalize",
    "layer_slice",
    "load_bundle",
    "load_model",
    "make_synthetic_bundle",
    "mask_image",
    "masking_curve",
    "occlusion_attribution",
    "pool_to_patches",
    "run",
    "save_bundle",
    "save_model",
    "softmax",
    "tsne",
    "validate_external_attribution",
]
