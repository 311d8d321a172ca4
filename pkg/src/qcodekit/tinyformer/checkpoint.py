"""Adapter checkpoints: JSON manifest + one array file per factor.

Adapters are stored apart from base weights: a directory holding
``manifest.json`` (rank, targets, layer map, model config) and a ``.npy``
file per A/B matrix (little-endian float32, row-major, shape carried in the
npy header).  The base model is reconstructed from its config seed, which the
manifest records along with a checksum to detect mismatches.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigurationError
from .lora import LoraConfig, attach_lora, iter_adapters
from .model import ModelConfig, TinyTransformer, init_model
from .train import base_weight_checksum

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


def save_adapters(model: TinyTransformer, out_dir: str | Path) -> Path:
    """Write the adapter directory; returns the manifest path."""
    config: LoraConfig | None = getattr(model, "lora_config", None)
    if config is None:
        raise ConfigurationError("model has no adapters to save")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    layer_map = []
    for adapter in iter_adapters(model):
        stem = adapter.attached_to.replace(".", "_")
        a_file, b_file = f"{stem}_A.npy", f"{stem}_B.npy"
        np.save(out_dir / a_file, adapter.A.detach().cpu().numpy().astype("<f4"))
        np.save(out_dir / b_file, adapter.B.detach().cpu().numpy().astype("<f4"))
        layer_map.append({"attached_to": adapter.attached_to, "a_file": a_file, "b_file": b_file})
    manifest = {
        "format_version": FORMAT_VERSION,
        "rank": config.rank,
        "dropout": config.dropout,
        "targets": list(config.targets),
        "scale": config.scale,
        "layer_map": layer_map,
        "model": model.config.to_dict(),
        "base_checksum": base_weight_checksum(model),
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def load_adapters(adapter_dir: str | Path, model: TinyTransformer | None = None) -> TinyTransformer:
    """Rebuild an adapted model from an adapter directory.

    When ``model`` is omitted the base model is re-initialized from the
    manifest's model config (deterministic by seed).  A supplied model must
    match the manifest's config.
    """
    adapter_dir = Path(adapter_dir)
    manifest = json.loads((adapter_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint format: {manifest.get('format_version')}")
    model_config = ModelConfig(**manifest["model"])
    if model is None:
        model = init_model(model_config)
    elif model.config != model_config:
        raise ConfigurationError("supplied model config does not match checkpoint manifest")
    lora_config = LoraConfig(
        rank=manifest["rank"],
        dropout=manifest["dropout"],
        targets=tuple(manifest["targets"]),
        scale=manifest["scale"],
    )
    if getattr(model, "lora_config", None) is None:
        attach_lora(model, lora_config)
    by_name = {adapter.attached_to: adapter for adapter in iter_adapters(model)}
    for entry in manifest["layer_map"]:
        adapter = by_name.get(entry["attached_to"])
        if adapter is None:
            raise ConfigurationError(f"checkpoint adapter {entry['attached_to']!r} has no slot in model")
        a = np.load(adapter_dir / entry["a_file"])
        b = np.load(adapter_dir / entry["b_file"])
        with torch.no_grad():
            adapter.A.copy_(torch.from_numpy(a))
            adapter.B.copy_(torch.from_numpy(b))
    return model
