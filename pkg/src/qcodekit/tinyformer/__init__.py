"""Reference decoder-only micro-transformer with low-rank adapters.

Small enough to train on a laptop in seconds, complete enough to make the
freeze-base/train-adapters mechanism executable and checkable end to end.
"""

from .model import ModelConfig, TinyTransformer, init_model
from .lora import (
    LoraAdapter,
    LoraConfig,
    attach_lora,
    effective_weight,
    merge_adapters,
    trainable_parameter_count,
    unmerge_adapters,
)
from .train import (
    OptimizerState,
    TrainConfig,
    batch_loss,
    init_optimizer,
    train_lora,
    train_step,
)
from .checkpoint import load_adapters, save_adapters

__all__ = [
    "ModelConfig",
    "TinyTransformer",
    "init_model",
    "LoraAdapter",
    "LoraConfig",
    "attach_lora",
    "effective_weight",
    "merge_adapters",
    "unmerge_adapters",
    "trainable_parameter_count",
    "TrainConfig",
    "OptimizerState",
    "init_optimizer",
    "batch_loss",
    "train_step",
    "train_lora",
    "save_adapters",
    "load_adapters",
]
