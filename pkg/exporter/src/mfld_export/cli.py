"""``mfld-export --config export.yaml``

Config schema:
    model_factory: "package.module:callable"   # returns a torch.nn.Module
    layers: [module names from named_modules()]
    inputs: path to an .npz (one array per example id)
    labels: path to a CSV with header "id,key1,key2,..."
    center_frames: optional CSV with header "id,center_frame"
    required_keys: optional list of label keys every example must carry
    dtype: f32 | f64 (default f32)
    out: output store directory
"""

from __future__ import annotations

import argparse
import csv
import importlib
import sys
from pathlib import Path

import numpy as np
import yaml

from .hooks import ExampleSpec, ExportSpec, export_activations


def _load_factory(ref: str):
    module_name, _, attr = ref.partition(":")
    if not attr:
        raise ValueError(f"model_factory must look like 'module:callable', got {ref!r}")
    return getattr(importlib.import_module(module_name), attr)


def _read_label_csv(path: str) -> dict[str, dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[0] != "id":
            raise ValueError(f"{path}: expected a CSV whose first column is 'id'")
        out = {}
        for row in reader:
            ex_id = row.pop("id")
            out[ex_id] = row
    return out


def _read_alignment_csv(path: str) -> dict[str, int]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {row["id"]: int(row["center_frame"]) for row in reader}


def run_export(config: dict) -> Path:
    factory = _load_factory(config["model_factory"])
    model = factory()
    arrays = np.load(config["inputs"])
    labels = _read_label_csv(config["labels"])
    alignments = (_read_alignment_csv(config["center_frames"])
                  if config.get("center_frames") else {})
    examples = []
    for ex_id in arrays.files:
        if ex_id not in labels:
            raise ValueError(f"input {ex_id!r} has no label row")
        examples.append(ExampleSpec(
            id=ex_id, input=arrays[ex_id], labels=labels[ex_id],
            center_frame=alignments.get(ex_id)))
    spec = ExportSpec(
        model=model,
        layers=list(config["layers"]),
        examples=examples,
        dtype=config.get("dtype", "f32"),
        output_path=config["out"],
        required_keys=list(config.get("required_keys", [])),
    )
    return export_activations(spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfld-export", description=__doc__)
    parser.add_argument("--config", required=True, help="export YAML config")
    args = parser.parse_args(argv)
    with open(args.config) as fh:
        config = yaml.safe_load(fh)
    try:
        out = run_export(config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote activation store to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
