"""Analysis orchestration across layers and timesteps, plus report rendering."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dims import classifier_probe, spectrum_metrics
from .empirical import empirical_capacity
from .errors import MfldError, NoRecords
from .manifolds import CENTER, FLATTEN_ALL, assemble_manifolds, permute_labels, random_project
from .mft import analyze
from .seeding import seed_list
from .store import ActivationStore, read_store

RUN_FLAGS = ("mft", "empirical", "dims", "probe")
TIMESTEP_MODES = (FLATTEN_ALL, "per-timestep", CENTER)


@dataclass
class AnalysisConfig:
    input_path: str
    manifold_key: str
    layers: list[str] | str = "all"
    timestep_mode: str = FLATTEN_ALL
    n_proj: int = 5000
    n_t: int = 200
    n_dichotomies: int = 101
    kappa: float = 0.0
    variance_threshold: float = 0.90
    corr_mode: str = "pearson"
    seed: int = 0
    run: tuple[str, ...] = ("mft", "dims")
    permute_control: bool = False
    frac_tol: float = 0.05
    adaptive_bracketing: bool = True
    orthonormalize: bool = False
    n_splits: int = 10
    train_frac: float = 0.8

    def validate(self):
        if self.timestep_mode not in TIMESTEP_MODES:
            raise MfldError(f"timestep_mode must be one of {TIMESTEP_MODES}")
        unknown = set(self.run) - set(RUN_FLAGS)
        if unknown:
            raise MfldError(f"unknown run flags: {sorted(unknown)}")
        if not self.run:
            raise MfldError("at least one run flag must be set")
        for name in ("n_proj", "n_t", "n_dichotomies", "n_splits"):
            if getattr(self, name) < 1:
                raise MfldError(f"{name} must be positive")
        if self.seed < 0:
            raise MfldError("seed must be nonnegative")


@dataclass
class AnalysisRecord:
    """One report row: one (layer, timestep, control) analysis cell."""

    layer: str
    timestep: str                  # "all", "center", or a frame index as text
    manifold_key: str
    control: str = "none"          # "none" or "permuted"
    seed: int = 0
    n_manifolds: int = 0
    mean_points: float = 0.0
    feature_dim: int = 0           # dimension the analyses actually ran in
    projected: bool = False
    alpha_lb: float = math.nan
    alpha_mft: float = math.nan
    alpha_mft_stderr: float = math.nan
    alpha_norm: float = math.nan   # alpha_mft / alpha_lb
    mean_radius: float = math.nan
    mean_dimension: float = math.nan
    mean_dim_over_m: float = math.nan
    rho_center_pre: float = math.nan
    rho_center_post: float = math.nan
    center_subspace_dim: int = 0
    n_excluded: int = 0
    n_rejected_qp: int = 0
    per_manifold_alpha: list[float] = field(default_factory=list)
    d_pr: float = math.nan
    d_ev: int = 0
    alpha_sim: float = math.nan
    alpha_sim_norm: float = math.nan
    n_critical: int = 0
    fraction_at_critical: float = math.nan
    probe_accuracy: float = math.nan
    probe_stderr: float = math.nan
    error: str = ""


# stable CSV column order
_COLUMNS = [f.name for f in dataclasses.fields(AnalysisRecord)]


def _analyze_one(mset, config: AnalysisConfig, cell_seed: list[int],
                 record: AnalysisRecord) -> AnalysisRecord:
    record.n_manifolds = mset.n_manifolds
    record.mean_points = float(np.mean(mset.sizes))
    record.feature_dim = mset.feature_dim
    record.alpha_lb = 2.0 / record.mean_points
    if "mft" in config.run:
        rep = analyze(mset, n_t=config.n_t, seed=seed_list(cell_seed, 1),
                      kappa=config.kappa, variance_threshold=config.variance_threshold,
                      corr_mode=config.corr_mode)
        record.alpha_mft = rep.alpha
        record.alpha_mft_stderr = rep.stderr_alpha
        record.alpha_norm = rep.alpha / record.alpha_lb
        record.mean_radius = rep.mean_radius
        record.mean_dimension = rep.mean_dimension
        record.mean_dim_over_m = rep.mean_dim_over_m
        record.rho_center_pre = rep.rho_center_pre
        record.rho_center_post = rep.rho_center_post
        record.center_subspace_dim = rep.center_subspace_dim
        record.n_excluded = len(rep.excluded_labels)
        record.n_rejected_qp = rep.n_rejected
        record.per_manifold_alpha = [float(m.alpha) for m in rep.per_manifold]
    if "dims" in config.run:
        spec = spectrum_metrics(mset.pooled(), config.variance_threshold)
        record.d_pr = spec.participation_ratio
        record.d_ev = spec.explained_variance_dim
    if "empirical" in config.run:
        est = empirical_capacity(mset, n_dichotomies=config.n_dichotomies,
                                 seed=seed_list(cell_seed, 2), frac_tol=config.frac_tol,
                                 adaptive=config.adaptive_bracketing)
        record.alpha_sim = est.alpha_sim
        record.alpha_sim_norm = est.alpha_sim / record.alpha_lb
        record.n_critical = est.n_critical
        record.fraction_at_critical = est.fraction_at_critical
    if "probe" in config.run:
        probe = classifier_probe(mset, n_splits=config.n_splits,
                                 train_frac=config.train_frac,
                                 seed=seed_list(cell_seed, 3))
        record.probe_accuracy = probe.mean
        record.probe_stderr = probe.stderr
    return record


def _run_cell(store: ActivationStore, config: AnalysisConfig, layer_idx: int,
              layer_name: str, selector, timestep_label: str) -> list[AnalysisRecord]:
    t_code = {FLATTEN_ALL: 0, CENTER: 1}.get(selector)
    t_code = t_code if t_code is not None else int(selector) + 2
    cell_seed = seed_list(config.seed, layer_idx, t_code)
    records = []
    variants = [("none", 0)] + ([("permuted", 1)] if config.permute_control else [])
    try:
        mset = assemble_manifolds(store, config.manifold_key, layer_name, selector)
        if mset.feature_dim > config.n_proj:
            mset = random_project(mset, config.n_proj, seed=seed_list(cell_seed, 4),
                                  orthonormalize=config.orthonormalize)
            projected = True
        else:
            projected = False
    except Exception as exc:  # per-cell failure: record and continue
        rec = AnalysisRecord(layer=layer_name, timestep=timestep_label,
                             manifold_key=config.manifold_key, seed=config.seed,
                             error=f"{type(exc).__name__}: {exc}")
        return [rec]
    for control, ctrl_code in variants:
        record = AnalysisRecord(layer=layer_name, timestep=timestep_label,
                                manifold_key=config.manifold_key, control=control,
                                seed=config.seed, projected=projected)
        try:
            m = mset if control == "none" else permute_labels(
                mset, seed_list(cell_seed, 5))
            _analyze_one(m, config, seed_list(cell_seed, ctrl_code), record)
        except Exception as exc:
            record.error = f"{type(exc).__name__}: {exc}"
        records.append(record)
    return records


def run_analysis(config: AnalysisConfig, store: ActivationStore | None = None,
                 workers: int | None = None) -> list[AnalysisRecord]:
    """Run the configured analyses over every (layer x timestep) cell.

    Cells are processed by a bounded worker pool (capped by MFLD_THREADS) and
    merged in (layer order, timestep) order, so reports are byte-stable for a
    fixed config regardless of worker count. Failed cells yield records with
    a non-empty ``error`` and the run continues.
    """
    config.validate()
    if store is None:
        store = read_store(config.input_path)
    store.validate()
    layer_names = [rec.name for rec in store.layers]
    if config.layers != "all":
        missing = set(config.layers) - set(layer_names)
        if missing:
            raise MfldError(f"layers not in store: {sorted(missing)}")
        layer_names = [n for n in layer_names if n in set(config.layers)]

    cells = []
    for layer_idx, name in enumerate(layer_names):
        if config.timestep_mode == FLATTEN_ALL:
            cells.append((layer_idx, name, FLATTEN_ALL, "all"))
        elif config.timestep_mode == CENTER:
            cells.append((layer_idx, name, CENTER, "center"))
        else:
            n_steps = store.layer(name).shape[1]
            if n_steps == 1:
                # the single frame is the flattened layer; share its seed so
                # both modes agree bit for bit
                cells.append((layer_idx, name, FLATTEN_ALL, "0"))
            else:
                for t in range(n_steps):
                    cells.append((layer_idx, name, t, str(t)))

    if workers is None:
        workers = _default_workers()
    results: dict[int, list[AnalysisRecord]] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {
            pool.submit(_run_cell, store, config, li, name, sel, tl): i
            for i, (li, name, sel, tl) in enumerate(cells)
        }
        for fut, i in futures.items():
            results[i] = fut.result()
    records = []
    for i in range(len(cells)):
        records.extend(results[i])
    return records


def _json_ready(value):
    if isinstance(value, float):
        return None if math.isnan(value) else value
    if isinstance(value, list):
        return [_json_ready(v) for v in value]
    return value


def render_report(records: list[AnalysisRecord], fmt: str, path: str | Path,
                  config: AnalysisConfig | None = None) -> Path:
    """Write records as a schema-versioned JSON array or a flat CSV.

    Both carry the toolkit version and a config echo (CSV as leading ``#``
    comment lines). Rendering an empty record list raises NoRecords.
    """
    if not records:
        raise NoRecords("no records to render")
    path = Path(path)
    config_dict = dataclasses.asdict(config) if config is not None else None
    if fmt == "json":
        doc = {
            "schema_version": 1,
            "toolkit_version": __version__,
            "config": config_dict,
            "records": [
                {k: _json_ready(v) for k, v in dataclasses.asdict(r).items()}
                for r in records
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(f"# toolkit_version={__version__}\n")
            if config_dict is not None:
                fh.write(f"# config={json.dumps(config_dict, sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            for r in records:
                writer.writerow([_csv_value(getattr(r, c)) for c in _COLUMNS])
    else:
        raise MfldError(f"unknown report format {fmt!r}")
    return path


def _csv_value(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    if isinstance(value, list):
        return ";".join(repr(float(v)) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def read_report(path: str | Path) -> tuple[list[AnalysisRecord], dict]:
    """Read back a JSON report into records plus metadata."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise MfldError(f"unsupported report schema {doc.get('schema_version')!r}")
    records = []
    for raw in doc["records"]:
        kwargs = {}
        for f in dataclasses.fields(AnalysisRecord):
            if f.name not in raw:
                continue
            v = raw[f.name]
            if v is None and f.type in ("float", float):
                v = math.nan
            kwargs[f.name] = v
        records.append(AnalysisRecord(**kwargs))
    meta = {k: doc.get(k) for k in ("schema_version", "toolkit_version", "config")}
    return records, meta


def _default_workers() -> int:
    env = os.environ.get("MFLD_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)
