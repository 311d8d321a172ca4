"""Adapter training: masked next-token loss, gradient accumulation, AdamW.

The batch loss is the mean over sequences of each sequence's mean masked
cross-entropy.  Micro-batch gradients are scaled by 1/grad_accum_steps before
accumulation, so accumulating k micro-batches reproduces the gradient of one
k-times-larger batch.  Gradients are zeroed at the start of each accumulation
window (not after the optimizer step), which keeps the accumulated gradient
inspectable after an update.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import torch

from ..errors import ConfigurationError, NonFiniteLossError
from ..tokenizer import EncodedPair
from .lora import adapter_parameters, iter_adapters
from .model import TinyTransformer


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-6
    epochs: int = 2
    micro_batch: int = 1
    grad_accum_steps: int = 4
    precision: str = "fp32"
    max_input_tokens: int = 15_000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("epochs", "micro_batch", "grad_accum_steps", "max_input_tokens"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.precision not in ("fp32", "fp16-emulated"):
            raise ConfigurationError(f"precision must be fp32 or fp16-emulated, got {self.precision}")


@dataclass
class OptimizerState:
    optimizer: torch.optim.Optimizer
    grad_accum_steps: int
    micro_step: int = 0
    loss_history: list[float] = field(default_factory=list)


def init_optimizer(model: TinyTransformer, config: TrainConfig) -> OptimizerState:
    """AdamW over adapter parameters only."""
    params = list(adapter_parameters(model))
    if not params:
        raise ConfigurationError("model has no adapters attached; nothing to train")
    optimizer = torch.optim.AdamW(
        params,
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    return OptimizerState(optimizer=optimizer, grad_accum_steps=config.grad_accum_steps)


def batch_loss(model: TinyTransformer, batch: list[EncodedPair]) -> torch.Tensor:
    """Mean over sequences of per-sequence mean masked cross-entropy."""
    if not batch:
        raise ValueError("batch must be nonempty")
    losses = []
    for pair in batch:
        ids = torch.tensor(pair.ids, dtype=torch.long)
        inputs, targets = ids[:-1], ids[1:]
        mask = torch.tensor(pair.mask, dtype=model.ln_f.weight.dtype)
        if mask.sum() == 0:
            raise ValueError("pair has no response tokens under the loss mask")
        logits = model(inputs)
        token_losses = torch.nn.functional.cross_entropy(logits, targets, reduction="none")
        losses.append((token_losses * mask).sum() / mask.sum())
    return torch.stack(losses).mean()


def train_step(
    model: TinyTransformer,
    batch: list[EncodedPair],
    config: TrainConfig,
    state: OptimizerState,
) -> tuple[float, OptimizerState]:
    """One micro-batch: accumulate gradients, step after grad_accum_steps.

    Only adapter parameters carry gradients; base weights are frozen and
    remain bit-identical across any number of steps.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    model.fp16_emulated = config.precision == "fp16-emulated"
    if state.micro_step % state.grad_accum_steps == 0:
        state.optimizer.zero_grad()
    loss = batch_loss(model, batch)
    if not torch.isfinite(loss):
        raise NonFiniteLossError(state.micro_step, float(loss))
    (loss / state.grad_accum_steps).backward()
    state.micro_step += 1
    if state.micro_step % state.grad_accum_steps == 0:
        state.optimizer.step()
    state.loss_history.append(float(loss))
    return float(loss), state


def train_lora(
    model: TinyTransformer,
    pairs: list[EncodedPair],
    config: TrainConfig,
    max_optimizer_steps: int | None = None,
) -> list[float]:
    """Run the epoch loop; returns the per-micro-batch loss trace.

    Pairs longer than ``config.max_input_tokens`` are excluded from training
    batches.  Batch order is a seeded shuffle per epoch, so fixed seeds give
    bit-identical traces.  ``max_optimizer_steps`` caps the number of
    optimizer updates for step-budgeted runs.
    """
    usable = [p for p in pairs if len(p.ids) <= config.max_input_tokens]
    if not usable:
        raise ValueError("no trainable pairs within max_input_tokens")
    state = init_optimizer(model, config)
    order_rng = random.Random(config.seed)
    model.train()
    try:
        for _ in range(config.epochs):
            order = list(range(len(usable)))
            order_rng.shuffle(order)
            for start in range(0, len(order), config.micro_batch):
                batch = [usable[i] for i in order[start : start + config.micro_batch]]
                train_step(model, batch, config, state)
                if (
                    max_optimizer_steps is not None
                    and state.micro_step // state.grad_accum_steps >= max_optimizer_steps
                ):
                    return state.loss_history
    finally:
        model.eval()
    return state.loss_history


def base_weight_checksum(model: TinyTransformer) -> str:
    """Order-stable digest of every non-adapter parameter's exact bytes."""
    import hashlib

    adapter_param_ids = {id(p) for a in iter_adapters(model) for p in (a.A, a.B)}
    digest = hashlib.sha256()
    for name, param in sorted(model.named_parameters(), key=lambda kv: kv[0]):
        if id(param) in adapter_param_ids:
            continue
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
