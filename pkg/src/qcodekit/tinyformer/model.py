"""Decoder-only micro-transformer.

Attention projection weights are stored in the mathematical orientation
W in R^{d x d} acting on column vectors (y = W x), so the low-rank update
in lora.py composes as W + A @ B without transposition gymnastics.  Forward
passes use row-vector activations, i.e. x @ W.T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError

_INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 2
    vocab_size: int = 260
    max_seq_len: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("d_model", "n_heads", "n_layers", "vocab_size", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "vocab_size": self.vocab_size,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
        }


class CausalSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.d_model = d_model
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.wq = nn.Parameter(torch.empty(d_model, d_model))
        self.wk = nn.Parameter(torch.empty(d_model, d_model))
        self.wv = nn.Parameter(torch.empty(d_model, d_model))
        self.wo = nn.Parameter(torch.empty(d_model, d_model))
        # low-rank adapter slots, populated by attach_lora
        self.q_adapter: nn.Module | None = None
        self.v_adapter: nn.Module | None = None
        self.adapters_merged = False

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        bsz, seq_len, _ = x.shape
        q = x @ self.wq.T
        k = x @ self.wk.T
        v = x @ self.wv.T
        if not self.adapters_merged:
            if self.q_adapter is not None:
                q = q + self.q_adapter(x)
            if self.v_adapter is not None:
                v = v + self.v_adapter(x)

        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(bsz, seq_len, self.n_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(q), split(k), split(v)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        mask = torch.triu(
            torch.ones(seq_len, seq_len, dtype=torch.bool, device=x.device), diagonal=1
        )
        scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).contiguous().view(bsz, seq_len, self.d_model)
        return out @ self.wo.T


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = CausalSelfAttention(d_model, n_heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.fc1 = nn.Linear(d_model, 4 * d_model)
        self.fc2 = nn.Linear(4 * d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x


class TinyTransformer(nn.Module):
    """Token embeddings + learned positions + pre-norm blocks + LM head.

    ``fp16_emulated`` rounds block activations through half precision, a
    cheap stand-in for mixed-precision parity checks; it never changes the
    stored weights.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.max_seq_len, config.d_model)
        self.blocks = nn.ModuleList(
            Block(config.d_model, config.n_heads) for _ in range(config.n_layers)
        )
        self.ln_f = nn.LayerNorm(config.d_model)
        self.lm_head = nn.Parameter(torch.empty(config.vocab_size, config.d_model))
        self.fp16_emulated = False
        self._reset_parameters(config.seed)

    def _reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        # Xavier-scaled head so post-norm activations can produce separated
        # logits; everything else uses the usual small-std transformer init.
        head_std = self.config.d_model**-0.5
        for name, param in self.named_parameters():
            if name == "lm_head":
                with torch.no_grad():
                    param.normal_(0.0, head_std, generator=gen)
            elif param.dim() >= 2:
                with torch.no_grad():
                    param.normal_(0.0, _INIT_STD, generator=gen)
            elif "ln" in name and name.endswith("weight"):
                nn.init.ones_(param)
            else:
                nn.init.zeros_(param)

    def attention_layers(self) -> list[CausalSelfAttention]:
        return [block.attn for block in self.blocks]

    def forward(self, tokens) -> torch.Tensor:
        if not torch.is_tensor(tokens):
            tokens = torch.tensor(tokens, dtype=torch.long)
        squeeze = tokens.dim() == 1
        if squeeze:
            tokens = tokens.unsqueeze(0)
        bsz, seq_len = tokens.shape
        if seq_len > self.config.max_seq_len:
            raise ValueError(
                f"sequence length {seq_len} exceeds max_seq_len {self.config.max_seq_len}"
            )
        positions = torch.arange(seq_len, device=tokens.device)
        dtype = self.ln_f.weight.dtype
        x = (self.tok_emb(tokens) + self.pos_emb(positions)).to(dtype)
        for block in self.blocks:
            x = block(x)
            if self.fp16_emulated:
                x = x.half().to(dtype)
        x = self.ln_f(x)
        logits = x @ self.lm_head.T
        return logits.squeeze(0) if squeeze else logits


def init_model(config: ModelConfig) -> TinyTransformer:
    """Build a model with weights deterministically derived from config.seed."""
    model = TinyTransformer(config)
    model.eval()
    return model
