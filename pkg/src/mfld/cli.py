"""Command-line interface.

Subcommands: ingest (CSV -> store), synth, analyze, empirical, report.
Exit codes: 0 success, 1 config or I/O failure, 2 partial cell failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import MfldError
from .report import AnalysisConfig, read_report, render_report, run_analysis
from .store import read_csv_store, read_store, write_store
from .synth import SynthSpec, make_manifolds, to_store


def _add_analysis_args(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="activation store directory")
    p.add_argument("--manifold-key", required=True, help="manifest label key defining manifolds")
    p.add_argument("--layers", default="all", help="comma-separated layer names or 'all'")
    p.add_argument("--timesteps", default="flatten-all",
                   choices=["flatten-all", "per-timestep", "center"])
    p.add_argument("--n-proj", type=int, default=5000,
                   help="project down to this many features when the layer is wider")
    p.add_argument("--n-t", type=int, default=200, help="Gaussian samples per manifold")
    p.add_argument("--n-dichotomies", type=int, default=101)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--center-var-threshold", type=float, default=0.90, dest="variance_threshold")
    p.add_argument("--corr-mode", default="pearson", choices=["pearson", "cosine"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--permute-control", action="store_true",
                   help="also analyze a permuted-label copy of every cell")
    p.add_argument("--frac-tol", type=float, default=0.05)
    p.add_argument("--no-adaptive-bracketing", action="store_true",
                   help="always use the full dichotomy count while bracketing")
    p.add_argument("--orthonormalize", action="store_true",
                   help="orthonormalize random projection columns")
    p.add_argument("--workers", type=int, default=None,
                   help="cell worker cap (default: MFLD_THREADS or cpu count)")
    p.add_argument("--out", required=True, help="report file to write")
    p.add_argument("--format", default="csv", choices=["csv", "json"])


def _config_from_args(args, run_flags) -> AnalysisConfig:
    layers = "all" if args.layers == "all" else [s for s in args.layers.split(",") if s]
    return AnalysisConfig(
        input_path=args.input,
        manifold_key=args.manifold_key,
        layers=layers,
        timestep_mode=args.timesteps,
        n_proj=args.n_proj,
        n_t=args.n_t,
        n_dichotomies=args.n_dichotomies,
        kappa=args.kappa,
        variance_threshold=args.variance_threshold,
        corr_mode=args.corr_mode,
        seed=args.seed,
        run=tuple(run_flags),
        permute_control=args.permute_control,
        frac_tol=args.frac_tol,
        adaptive_bracketing=not args.no_adaptive_bracketing,
        orthonormalize=args.orthonormalize,
    )


def cmd_ingest(args) -> int:
    store = read_csv_store(args.csv)
    write_store(store, args.out)
    print(f"wrote store with {len(store.manifest)} examples to {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        family=args.family, n_manifolds=args.p, n_points=args.m,
        n_features=args.n, intrinsic_dim=args.d, radius=args.r,
        center_corr=args.center_corr, seed=args.seed, solid=args.solid,
    )
    mset = make_manifolds(spec)
    write_store(to_store(mset), args.out)
    print(f"wrote {args.family} store (P={args.p}, M={args.m}, N={args.n}) to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    run_flags = [s for s in args.run.split(",") if s]
    config = _config_from_args(args, run_flags)
    records = run_analysis(config, workers=args.workers)
    render_report(records, args.format, args.out, config=config)
    n_failed = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} records to {args.out}"
          + (f" ({n_failed} cells failed)" if n_failed else ""))
    return 2 if n_failed else 0


def cmd_empirical(args) -> int:
    config = _config_from_args(args, ["empirical"])
    records = run_analysis(config, workers=args.workers)
    render_report(records, args.format, args.out, config=config)
    n_failed = sum(1 for r in records if r.error)
    for r in records:
        if not r.error:
            print(f"{r.layer} t={r.timestep}: alpha_sim={r.alpha_sim:.4f} "
                  f"N_c={r.n_critical} fraction={r.fraction_at_critical:.3f}")
    return 2 if n_failed else 0


def cmd_report(args) -> int:
    records, meta = read_report(args.input)
    render_report(records, args.format, args.out)
    print(f"re-rendered {len(records)} records "
          f"(toolkit {meta.get('toolkit_version')}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfld", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mfld {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="import a label,f0,f1,... CSV as a store")
    p.add_argument("csv", help="input CSV path")
    p.add_argument("--out", required=True, help="store directory to create")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic manifold store")
    p.add_argument("--family", required=True,
                   choices=["ball", "gaussian-cloud", "correlated-centers"])
    p.add_argument("-p", type=int, required=True, help="number of manifolds")
    p.add_argument("-m", type=int, required=True, help="points per manifold")
    p.add_argument("-n", type=int, required=True, help="feature dimension")
    p.add_argument("-d", type=int, default=0, help="intrinsic dimension (ball)")
    p.add_argument("-r", type=float, default=1.0, help="relative radius")
    p.add_argument("--center-corr", type=float, default=0.0)
    p.add_argument("--solid", action="store_true", help="sample the solid ball")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="run analyses over layers and timesteps")
    _add_analysis_args(p)
    p.add_argument("--run", default="mft,dims",
                   help="comma-separated subset of mft,empirical,dims,probe")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("empirical", help="run only the bisection capacity")
    _add_analysis_args(p)
    p.set_defaults(func=cmd_empirical)

    p = sub.add_parser("report", help="re-render a JSON report as csv or json")
    p.add_argument("input", help="existing JSON report")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MfldError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
