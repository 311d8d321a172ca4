"""Low-rank adapters: attach, apply, merge, unmerge.

An adapter holds two factors A (d x r) and B (r x d) whose product is an
additive update to one frozen attention projection: W' = W + A @ B.  A is
initialized from a zero-mean Gaussian and B to zeros, so the adapted model
starts exactly at the base model.  Only A and B are ever trainable.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import torch
from torch import nn

from ..errors import ConfigurationError
from .model import CausalSelfAttention, TinyTransformer

VALID_TARGETS = ("query", "value")


@dataclass(frozen=True)
class LoraConfig:
    rank: int = 8
    dropout: float = 0.05
    targets: tuple[str, ...] = ("query", "value")
    # Update applied as-is (scale 1); kept as a knob rather than an alpha/rank
    # scheme because the adapted weight is defined as plain W + A @ B.
    scale: float = 1.0
    # None -> Kaiming-style 1/sqrt(rank): A is the up-projection whose
    # fan-in is the rank
    init_std: float | None = None

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ConfigurationError(f"rank must be >= 1, got {self.rank}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1], got {self.dropout}")
        if not self.targets:
            raise ConfigurationError("targets must be nonempty")
        unknown = [t for t in self.targets if t not in VALID_TARGETS]
        if unknown:
            raise ConfigurationError(f"unknown adapter targets {unknown}; valid: {VALID_TARGETS}")


class LoraAdapter(nn.Module):
    """One low-rank update attached to a single target matrix."""

    def __init__(
        self,
        d_model: int,
        rank: int,
        attached_to: str,
        dropout: float = 0.05,
        scale: float = 1.0,
        init_std: float | None = None,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        if rank >= d_model:
            raise ConfigurationError(f"rank ({rank}) must be < d_model ({d_model})")
        self.attached_to = attached_to
        self.rank = rank
        self.scale = scale
        self.A = nn.Parameter(torch.empty(d_model, rank))
        self.B = nn.Parameter(torch.zeros(rank, d_model))
        with torch.no_grad():
            self.A.normal_(0.0, rank**-0.5 if init_std is None else init_std, generator=generator)
        self.dropout = nn.Dropout(dropout)

    def delta(self) -> torch.Tensor:
        """The dense update this adapter contributes: scale * A @ B."""
        return self.scale * (self.A @ self.B)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # row-vector form of (A @ B) x; dropout on the adapter input path only
        return self.scale * ((self.dropout(x) @ self.B.T) @ self.A.T)


def effective_weight(weight, adapter: LoraAdapter):
    """Return W + scale * A @ B without modifying any input."""
    a = adapter.A.detach()
    b = adapter.B.detach()
    if torch.is_tensor(weight):
        if weight.shape != (a.shape[0], b.shape[1]):
            raise ValueError(
                f"weight shape {tuple(weight.shape)} does not match adapter "
                f"({a.shape[0]}, {b.shape[1]})"
            )
        return weight + adapter.scale * (a.to(weight.dtype) @ b.to(weight.dtype))
    import numpy as np

    weight = np.asarray(weight)
    a_np, b_np = a.numpy(), b.numpy()
    if weight.shape != (a_np.shape[0], b_np.shape[1]):
        raise ValueError(
            f"weight shape {weight.shape} does not match adapter "
            f"({a_np.shape[0]}, {b_np.shape[1]})"
        )
    return weight + adapter.scale * (a_np.astype(weight.dtype) @ b_np.astype(weight.dtype))


def attach_lora(
    model: TinyTransformer,
    config: LoraConfig,
    seed: int | None = None,
) -> TinyTransformer:
    """Attach one adapter per (layer, target) and freeze all base weights.

    Adapter initialization is deterministic: the generator is seeded from
    ``seed`` when given, else from ``model.config.seed + 1``.
    """
    if getattr(model, "lora_config", None) is not None:
        raise ConfigurationError("model already has adapters attached")
    gen = torch.Generator().manual_seed(model.config.seed + 1 if seed is None else seed)

    for param in model.parameters():
        param.requires_grad_(False)

    dtype = model.ln_f.weight.dtype
    for layer_idx, attn in enumerate(model.attention_layers()):
        for target in config.targets:
            adapter = LoraAdapter(
                model.config.d_model,
                config.rank,
                attached_to=f"layer{layer_idx}.{target}",
                dropout=config.dropout,
                scale=config.scale,
                init_std=config.init_std,
                generator=gen,
            ).to(dtype)
            if target == "query":
                attn.q_adapter = adapter
            else:
                attn.v_adapter = adapter
    model.lora_config = config
    return model


def iter_adapters(model: TinyTransformer) -> list[LoraAdapter]:
    out: list[LoraAdapter] = []
    for attn in model.attention_layers():
        for adapter in (attn.q_adapter, attn.v_adapter):
            if adapter is not None:
                out.append(adapter)
    return out


def adapter_parameters(model: TinyTransformer):
    for adapter in iter_adapters(model):
        yield adapter.A
        yield adapter.B


def trainable_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _target_weight(attn: CausalSelfAttention, adapter: LoraAdapter) -> nn.Parameter:
    return attn.wq if adapter.attached_to.endswith("query") else attn.wv


def merge_adapters(model: TinyTransformer, inplace: bool = False) -> TinyTransformer:
    """Fold every adapter's update into its target weight.

    Returns a model whose plain forward matches the adapted forward; by
    default the input model is left untouched and a merged copy is returned.
    The adapters stay attached (inactive) so ``unmerge_adapters`` can restore
    the original weights.
    """
    if getattr(model, "lora_config", None) is None:
        raise ConfigurationError("model has no adapters to merge")
    merged = model if inplace else copy.deepcopy(model)
    for attn in merged.attention_layers():
        if attn.adapters_merged:
            continue
        for adapter in (attn.q_adapter, attn.v_adapter):
            if adapter is None:
                continue
            with torch.no_grad():
                _target_weight(attn, adapter).add_(adapter.delta())
        attn.adapters_merged = True
    return merged


def unmerge_adapters(model: TinyTransformer) -> TinyTransformer:
    """Subtract every folded update, restoring the pre-merge weights in place."""
    for attn in model.attention_layers():
        if not attn.adapters_merged:
            continue
        for adapter in (attn.q_adapter, attn.v_adapter):
            if adapter is None:
                continue
            with torch.no_grad():
                _target_weight(attn, adapter).sub_(adapter.delta())
        attn.adapters_merged = False
    return model
