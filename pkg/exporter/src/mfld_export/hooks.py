"""Forward-hook capture of per-layer activations for a labeled example list."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .manifest import DuplicateExample, IncompleteManifest, build_manifest
from .writer import write_store


class HookResolutionError(Exception):
    """A requested layer name does not resolve to a model module."""


class ShapeMismatch(Exception):
    """A layer produced differently shaped activations across examples."""


@dataclass
class ExampleSpec:
    id: str
    input: torch.Tensor | np.ndarray
    labels: dict[str, str]
    center_frame: int | None = None


@dataclass
class ExportSpec:
    model: torch.nn.Module
    layers: list[str]                    # names from model.named_modules()
    examples: list[ExampleSpec]
    dtype: str = "f32"
    output_path: str | Path = "store"
    required_keys: list[str] = field(default_factory=list)


def _as_layer_row(output: torch.Tensor, layer: str, example_id: str) -> np.ndarray:
    """One example's activation as (timesteps, features).

    Batch-first convention: rank-2 (1, F) output becomes a single frame;
    rank-3 (1, T, F) keeps the timestep axis (recurrent layers); higher ranks
    (e.g. conv maps (1, C, H, W)) are flattened to a single frame. The
    exporter never reshapes beyond removing the batch axis.
    """
    if isinstance(output, tuple):
        output = output[0]  # recurrent modules return (output, state)
    arr = output.detach().cpu().numpy()
    if arr.ndim < 2 or arr.shape[0] != 1:
        raise ShapeMismatch(
            f"layer {layer!r} on example {example_id!r}: expected a batch-1 "
            f"output with at least 2 axes, got shape {arr.shape}")
    if arr.ndim == 2:
        return arr.reshape(1, arr.shape[1])
    if arr.ndim == 3:
        return arr[0]
    return arr.reshape(1, -1)


def export_activations(spec: ExportSpec) -> Path:
    """Run every example through the model and write a conformant store.

    One layer record per hook name; row order in every layer matches the
    example list exactly. The output directory passes the analysis toolkit's
    read_store validation.
    """
    modules = dict(spec.model.named_modules())
    missing = [name for name in spec.layers if name not in modules]
    if missing:
        raise HookResolutionError(f"model has no modules named {missing}")
    ids = [ex.id for ex in spec.examples]
    if len(set(ids)) != len(ids):
        raise DuplicateExample("example ids are not unique")

    captured: dict[str, torch.Tensor] = {}
    handles = [
        modules[name].register_forward_hook(
            lambda module, inputs, output, name=name: captured.__setitem__(name, output))
        for name in spec.layers
    ]
    per_layer: dict[str, list[np.ndarray]] = {name: [] for name in spec.layers}
    try:
        spec.model.eval()
        with torch.no_grad():
            for ex in spec.examples:
                captured.clear()
                x = torch.as_tensor(np.asarray(ex.input))
                spec.model(x.unsqueeze(0))
                for name in spec.layers:
                    if name not in captured:
                        raise HookResolutionError(
                            f"layer {name!r} did not fire on example {ex.id!r}")
                    row = _as_layer_row(captured[name], name, ex.id)
                    prev = per_layer[name]
                    if prev and prev[0].shape != row.shape:
                        raise ShapeMismatch(
                            f"layer {name!r}: example {ex.id!r} produced shape "
                            f"{row.shape}, earlier examples gave {prev[0].shape}")
                    prev.append(row)
    finally:
        for h in handles:
            h.remove()

    labels = {ex.id: ex.labels for ex in spec.examples}
    alignments = {ex.id: ex.center_frame for ex in spec.examples
                  if ex.center_frame is not None}
    entries = build_manifest(labels, alignments, required_keys=spec.required_keys)
    layers = [(name, np.stack(per_layer[name])) for name in spec.layers]
    return write_store(Path(spec.output_path), layers, spec.dtype, entries)
