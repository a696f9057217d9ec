"""Model registry and per-head attention capture.

Attention is captured by forward hooks on every ``nn.MultiheadAttention``
module: the hook recomputes the post-softmax per-head attention matrix from
the module's own projection weights and the hooked inputs, because standard
ViT blocks call attention with ``need_weights=False`` and averaged weights
would lose the per-head structure anyway. The recomputation is checked
against the module's native ``need_weights=True`` path in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import HookFailureError, ModelUnavailableError


@dataclass
class ModelBundle:
    """A model plus the geometry the exporter needs."""

    model: nn.Module
    image_size: int            # square input side
    channels: int
    patch_size: int
    n_classes: int
    class_names: list[str]
    # GradCAM target: the last encoder block's pre-attention LayerNorm.
    # Patch tokens there still reach the CLS embedding through that block's
    # attention; at the final LayerNorm only the CLS row carries gradient.
    cam_layer: nn.Module
    name: str = "model"

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2


class EncoderBlock(nn.Module):
    """Pre-norm transformer block built on nn.MultiheadAttention."""

    def __init__(self, dim: int, n_heads: int, mlp_dim: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, n_heads, batch_first=True)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_dim), nn.GELU(), nn.Linear(mlp_dim, dim)
        )

    def forward(self, x):
        h = self.ln1(x)
        attended, _ = self.attn(h, h, h, need_weights=False)
        x = x + attended
        return x + self.mlp(self.ln2(x))


class TinyViT(nn.Module):
    """Small self-contained ViT classifier for tests and smoke exports."""

    def __init__(self, image_size=32, channels=3, patch_size=8, dim=32,
                 n_layers=2, n_heads=2, n_classes=10):
        super().__init__()
        self.patch_embed = nn.Conv2d(channels, dim, kernel_size=patch_size, stride=patch_size)
        n_patches = (image_size // patch_size) ** 2
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, n_patches + 1, dim))
        self.blocks = nn.ModuleList(
            [EncoderBlock(dim, n_heads, 4 * dim) for _ in range(n_layers)]
        )
        self.ln = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, n_classes)
        nn.init.normal_(self.pos_embed, std=0.02)
        nn.init.normal_(self.cls_token, std=0.02)

    def forward(self, x):
        tokens = self.patch_embed(x).flatten(2).transpose(1, 2)  # [B, P, D]
        cls = self.cls_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, tokens], dim=1) + self.pos_embed
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln(x)[:, 0])


def _reinit_zero_head(model: nn.Module) -> None:
    """torchvision zero-initializes ViT classification heads (a finetuning
    convention); an untrained zero head outputs all-zero scores and kills
    every gradient, so stand-in models get a seeded random head."""
    head = model.heads.head
    if float(head.weight.detach().abs().sum()) == 0.0:
        generator = torch.Generator().manual_seed(1)
        with torch.no_grad():
            head.weight.normal_(0.0, 0.02, generator=generator)


def _torchvision_vit(name: str, pretrained: bool) -> ModelBundle:
    import torchvision.models as tvm

    builder = getattr(tvm, name, None)
    if builder is None:
        raise ModelUnavailableError(f"torchvision has no model named {name!r}")
    try:
        model = builder(weights="DEFAULT" if pretrained else None)
    except Exception as e:  # hub download failures, unknown weight enums
        raise ModelUnavailableError(f"cannot obtain weights for {name}: {e}") from e
    if not pretrained:
        _reinit_zero_head(model)
    return ModelBundle(
        model=model,
        image_size=model.image_size,
        channels=3,
        patch_size=model.patch_size,
        n_classes=model.heads.head.out_features,
        class_names=[f"class{i}" for i in range(model.heads.head.out_features)],
        cam_layer=model.encoder.layers[-1].ln_1,
        name=name,
    )


def _torchvision_tiny() -> ModelBundle:
    from torchvision.models.vision_transformer import VisionTransformer

    torch.manual_seed(0)
    model = VisionTransformer(
        image_size=32, patch_size=8, num_layers=2, num_heads=2,
        hidden_dim=32, mlp_dim=64, num_classes=10,
    )
    _reinit_zero_head(model)
    return ModelBundle(
        model=model,
        image_size=32,
        channels=3,
        patch_size=8,
        n_classes=10,
        class_names=[f"class{i}" for i in range(10)],
        cam_layer=model.encoder.layers[-1].ln_1,
        name="torchvision-tiny",
    )


def _tiny() -> ModelBundle:
    torch.manual_seed(0)
    model = TinyViT()
    return ModelBundle(
        model=model,
        image_size=32,
        channels=3,
        patch_size=8,
        n_classes=10,
        class_names=[f"class{i}" for i in range(10)],
        cam_layer=model.blocks[-1].ln1,
        name="tiny",
    )


def load_model(identifier: str, pretrained: bool = False) -> ModelBundle:
    """Resolve a model id: 'tiny', 'torchvision-tiny', or a torchvision
    ViT constructor name like 'vit_b_16'."""
    if identifier == "tiny":
        bundle = _tiny()
    elif identifier == "torchvision-tiny":
        bundle = _torchvision_tiny()
    elif identifier.startswith("vit_"):
        bundle = _torchvision_vit(identifier, pretrained)
    else:
        raise ModelUnavailableError(
            f"unknown model id {identifier!r}; use 'tiny', 'torchvision-tiny' or a "
            "torchvision name like 'vit_b_16'"
        )
    bundle.model.eval()
    return bundle


@dataclass
class AttentionRecorder:
    """Captures per-head post-softmax attention from every MSA module."""

    maps: list = field(default_factory=list)   # one [B, H, T, T] tensor per layer
    _handles: list = field(default_factory=list)

    def attach(self, model: nn.Module) -> "AttentionRecorder":
        msa_modules = [m for m in model.modules() if isinstance(m, nn.MultiheadAttention)]
        if not msa_modules:
            raise HookFailureError(
                "architecture exposes no nn.MultiheadAttention module to hook"
            )
        for module in msa_modules:
            self._handles.append(module.register_forward_hook(self._hook))
        return self

    def detach(self):
        for handle in self._handles:
            handle.remove()
        self._handles.clear()

    def clear(self):
        self.maps.clear()

    @torch.no_grad()
    def _hook(self, module: nn.MultiheadAttention, inputs, output):
        query = inputs[0]
        if not module.batch_first:
            query = query.transpose(0, 1)
        b, t, d = query.shape
        heads = module.num_heads
        head_dim = d // heads
        bias = module.in_proj_bias
        if module.in_proj_weight is not None:
            wq, wk = module.in_proj_weight[:d], module.in_proj_weight[d : 2 * d]
        else:
            wq, wk = module.q_proj_weight, module.k_proj_weight
        bq = bias[:d] if bias is not None else None
        bk = bias[d : 2 * d] if bias is not None else None
        q = torch.nn.functional.linear(query, wq, bq)
        k = torch.nn.functional.linear(query, wk, bk)
        q = q.reshape(b, t, heads, head_dim).transpose(1, 2)
        k = k.reshape(b, t, heads, head_dim).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(head_dim)
        self.maps.append(torch.softmax(logits, dim=-1))


def stacked_attention(recorder: AttentionRecorder) -> torch.Tensor:
    """Stack the recorded per-layer maps into [B, L, H, T, T]."""
    if not recorder.maps:
        raise HookFailureError("no attention was recorded during the forward pass")
    return torch.stack(recorder.maps, dim=1)


def cls_attention_over_patches(attention: torch.Tensor) -> torch.Tensor:
    """CLS row per head, CLS column dropped and renormalized: [B, L, H, P]."""
    cls_rows = attention[:, :, :, 0, 1:]
    return cls_rows / cls_rows.sum(dim=-1, keepdim=True)
