"""Real-model data exporter for the attention/attribution analysis toolkit.

Hooks per-head post-softmax attention out of pretrained (or locally built)
torch ViTs, computes SmoothGrad or GradCAM attributions against predicted
or ground-truth classes, and writes self-describing bundle directories the
analysis package loads unchanged.
"""

from .attribution import gradcam, smoothgrad
from .errors import (
    DatasetUnavailableError,
    ExportError,
    HookFailureError,
    ModelUnavailableError,
    OutOfMemoryError,
)
from .export import ExportConfig, export, load_dataset
from .models import (
    AttentionRecorder,
    ModelBundle,
    TinyViT,
    cls_attention_over_patches,
    load_model,
    stacked_attention,
)
from .writer import write_bundle

__version__ = "0.1.0"

__all__ = [
    "AttentionRecorder",
    "DatasetUnavailableError",
    "ExportConfig",
    "ExportError",
    "HookFailureError",
    "ModelBundle",
    "ModelUnavailableError",
    "OutOfMemoryError",
    "TinyViT",
    "cls_attention_over_patches",
    "export",
    "gradcam",
    "load_dataset",
    "load_model",
    "smoothgrad",
    "stacked_attention",
    "write_bundle",
]
