"""Manifold separability toolkit.

Measures how linearly separable labeled point-cloud manifolds are inside
high-dimensional feature representations: mean-field capacity and geometry
(alpha, R_M, D_M, center correlations), empirical bisection capacity,
spectral dimension metrics, and a linear-classifier probe.
"""

__version__ = "0.1.0"

from .errors import (
    BadMagic,
    ManifestMismatch,
    MfldError,
    NoRecords,
    NonBracketable,
    TooFewManifolds,
    Truncated,
)
from .store import ActivationStore, LayerRecord, read_csv_store, read_store, write_store
from .manifolds import ManifoldSet, assemble_manifolds, permute_labels, random_project
from .geometry import (
    CenterStats,
    PreprocessedSet,
    compute_centers,
    find_center_subspace,
    normalize_centers,
    preprocess,
    project_residual,
    subtract_global_mean,
)
from .mft import (
    AnchorSolution,
    LocalManifold,
    ManifoldMetrics,
    MFTReport,
    aggregate_capacity,
    analyze,
    ball_capacity,
    build_local_frame,
    manifold_geometry,
    solve_anchor,
)
from .empirical import (
    CapacityEstimate,
    empirical_capacity,
    fraction_separable,
    is_separable,
    sample_dichotomy,
)
from .dims import (
    ProbeResult,
    classifier_probe,
    eigenspectrum,
    explained_variance_dim,
    participation_ratio,
)
from .synth import SynthSpec, make_ball_manifolds, make_gaussian_clouds, make_manifolds
from .report import AnalysisConfig, AnalysisRecord, read_report, render_report, run_analysis
