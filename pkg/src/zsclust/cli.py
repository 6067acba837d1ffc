"""Command-line surface: thin wrappers over the library operations.

Exit codes: 0 success, 1 usage or bad parameter, 2 data/validation
problem, 3 numeric failure. Flag names and defaults mirror the
benchmark parameterization (perplexity 30, n-neighbors 15,
min-dist 0.1, HDBSCAN 15/5, GMM seed 42, K in {15,30,45,90,180}).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import report as report_mod
from .cluster import ClusterAssignment
from .embank import read_bank, read_matrix, validate_bank, write_bank
from .errors import (
    DegenerateInputError,
    FormatError,
    NumericError,
    ParameterError,
    ScenarioError,
    UndefinedMetricError,
    ValidationError,
)
from .metrics import (
    MODE_EXCLUDE,
    MODE_SINGLETONS,
    cluster_geometry,
    compute_report,
    species_fate,
)
from .reduce import ReductionRecipe, apply_recipe, standardize
from .sampler import (
    IndexSubset,
    SamplingScenario,
    combine_subsets,
    gather_coords,
    sample_subset,
)
from .svgplot import emit_scatter_svg
from .synth import make_synthetic_bank

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        raise _UsageError(message)


class _Subcommands:
    """add_parser shim that shows each flag's default in --help."""

    def __init__(self, sub):
        self._sub = sub

    def add_parser(self, name: str, **kw):
        return self._sub.add_parser(
            name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, **kw
        )


def _build_parser() -> _Parser:
    parser = _Parser(prog="zsclust", description=__doc__)
    sub = _Subcommands(parser.add_subparsers(dest="command", required=True))

    p = sub.add_parser("validate", help="check a bank directory and summarize it")
    p.add_argument("bank", help="bank directory")

    p = sub.add_parser("sample", help="draw a seeded subset from a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True, help="subset JSON path")
    p.add_argument("--scenario", choices=["even", "uneven", "extreme"], default="even")
    p.add_argument("--n-species", type=int, default=30, help="species per subset")
    p.add_argument("--per-species", type=int, default=200, help="even-scenario rows per species")
    p.add_argument("--min-per-species", type=int, default=20, help="uneven/extreme lower bound")
    p.add_argument("--max-per-species", type=int, default=200, help="uneven upper bound")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--include-unvalidated", action="store_true", help="keep rows with validated=false")
    p.add_argument("--combine-with", help="existing subset JSON to concatenate")

    p = sub.add_parser("reduce", help="project a (subset of a) bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--subset", help="subset JSON; omitted = all rows")
    p.add_argument("--method", required=True,
                   choices=["raw", "pca", "kpca", "isomap", "tsne", "umap"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target-dim", type=int, default=2, help="output dimensionality")
    p.add_argument("--seed", type=int, default=0, help="reduction seed")
    p.add_argument("--perplexity", type=float, default=30.0, help="t-SNE perplexity")
    p.add_argument("--n-neighbors", type=int, default=15, help="UMAP/Isomap neighbor count")
    p.add_argument("--min-dist", type=float, default=0.1, help="UMAP minimum distance")
    p.add_argument("--gamma", type=float, help="kernel PCA gamma (default 1/D)")
    p.add_argument("--no-standardize", action="store_true", help="skip column standardization")

    p = sub.add_parser("cluster", help="cluster a reduced space")
    p.add_argument("--space", required=True, help="directory with embeddings.zseb")
    p.add_argument("--method", required=True,
                   choices=["hdbscan", "dbscan", "ward", "gmm"])
    p.add_argument("--out", required=True, help="labels JSON path")
    p.add_argument("--min-cluster-size", type=int, default=15, help="HDBSCAN minimum cluster size")
    p.add_argument("--min-samples", type=int, default=5, help="HDBSCAN/DBSCAN core neighbor count")
    p.add_argument("--eps", type=float, help="DBSCAN epsilon (overrides multiplier)")
    p.add_argument("--eps-multiplier", type=float, default=1.0,
                   help="DBSCAN eps = multiplier x k-distance mean")
    p.add_argument("--k", type=int, help="cluster count for ward/gmm")
    p.add_argument("--seed", type=int, default=42, help="GMM seed")

    p = sub.add_parser("eval", help="score labels against a subset's ground truth")
    p.add_argument("--labels", required=True)
    p.add_argument("--subset", required=True)
    p.add_argument("--space", help="reduced space directory for the silhouette")
    p.add_argument("--outlier-mode", choices=["exclude", "singletons"],
                   default="exclude")
    p.add_argument("--ii-threshold", type=float, default=0.95, help="isolation-index behavior threshold")
    p.add_argument("--ecc-threshold", type=float, default=1.5, help="effective-cluster-count behavior threshold")
    p.add_argument("--fate-threshold", type=int,
                   help="also report fates of species smaller than this")
    p.add_argument("--out", help="write the report JSON here as well")

    p = sub.add_parser("bench", help="run a factorial benchmark grid")
    p.add_argument("--config", help="BenchConfig JSON")
    p.add_argument("--plan", action="store_true", help="print grid size and exit")
    p.add_argument("--jobs", type=int, default=1, help="parallel cell-group workers")
    p.add_argument("--progress", action="store_true", help="print per-group progress")
    p.add_argument("--init-desk", metavar="DIR",
                   help="write the desk-scale synthetic preset and exit")

    p = sub.add_parser("count-experiment",
                       help="predicted-cluster-count protocol over species counts")
    p.add_argument("--bank", required=True)
    p.add_argument("--n-values", required=True,
                   help="comma-separated species counts, e.g. 5,10,15")
    p.add_argument("--runs-per-n", type=int, default=100, help="repetitions per species count")
    p.add_argument("--per-species", type=int, default=200, help="rows sampled per species")
    p.add_argument("--min-per-species", type=int, default=20, help="eligibility floor per species")
    p.add_argument("--reduce-method",
                   choices=["none", "pca", "kpca", "isomap", "tsne", "umap"],
                   default="none")
    p.add_argument("--min-cluster-size", type=int, default=15, help="HDBSCAN minimum cluster size")
    p.add_argument("--min-samples", type=int, default=5, help="HDBSCAN core neighbor count")
    p.add_argument("--seed", type=int, default=0, help="experiment seed")
    p.add_argument("--out", help="results JSON path")
    p.add_argument("--figure", help="PNG path for the prediction plot")

    p = sub.add_parser("plot", help="scatter SVG of a 2D space with labels")
    p.add_argument("--space", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--subset", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="aggregate a run log into tables and figures")
    p.add_argument("--log", required=True, help="runs.jsonl path")
    p.add_argument("--group-by", default="model,reduction,clustering", help="comma-separated group keys")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--true-count", type=int, help="ground-truth cluster count line in figures")
    return parser


def _cmd_validate(args) -> int:
    bank, manifest = read_bank(args.bank)
    summary = validate_bank(bank, manifest)
    print(json.dumps(summary.to_json_obj(), indent=2))
    return EXIT_OK if summary.ok else EXIT_DATA


def _cmd_sample(args) -> int:
    bank, manifest = read_bank(args.bank)
    scenario = SamplingScenario(
        kind=args.scenario,
        per_species=args.per_species,
        min_per_species=args.min_per_species,
        max_per_species=None if args.scenario == "extreme" else args.max_per_species,
        n_species=args.n_species,
        seed=args.seed,
    )
    subset = sample_subset(
        bank, manifest, scenario, include_unvalidated=args.include_unvalidated
    )
    if args.combine_with:
        subset = combine_subsets(IndexSubset.load(args.combine_with), subset)
    subset.save(args.out)
    print(f"subset of {len(subset)} rows -> {args.out}")
    return EXIT_OK


def _cmd_reduce(args) -> int:
    bank, manifest = read_bank(args.bank)
    if args.subset:
        subset = IndexSubset.load(args.subset)
        coords = gather_coords(subset, {subset.bank_keys[0]: bank})
    else:
        coords = bank.data
    coords = coords.astype(np.float64)
    if not args.no_standardize:
        coords = standardize(coords)

    params: dict = {}
    if args.method == "tsne":
        params["perplexity"] = args.perplexity
    elif args.method == "umap":
        params["n_neighbors"] = args.n_neighbors
        params["min_dist"] = args.min_dist
    elif args.method == "isomap":
        params["n_neighbors"] = args.n_neighbors
    elif args.method == "kpca" and args.gamma is not None:
        params["gamma"] = args.gamma
    recipe = ReductionRecipe(
        method=args.method,
        target_dim=coords.shape[1] if args.method == "raw" else args.target_dim,
        seed=args.seed,
        params=params,
    )
    space = apply_recipe(coords, recipe)
    space.save(args.out)
    print(f"{space.coords.shape[0]}x{space.coords.shape[1]} space -> {args.out}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    coords = read_matrix(Path(args.space) / "embeddings.zseb").astype(np.float64)
    if args.method in ("ward", "gmm") and args.k is None:
        raise _UsageError(f"--k is required for method {args.method}")
    params: dict = {}
    if args.method == "hdbscan":
        params = {"min_cluster_size": args.min_cluster_size,
                  "min_samples": args.min_samples}
    elif args.method == "dbscan":
        params = {"min_samples": args.min_samples}
        if args.eps is not None:
            params["eps"] = args.eps
        else:
            params["eps_multiplier"] = args.eps_multiplier
    else:
        params = {"k": args.k}
    spec = bench_mod.ClusterSpec(method=args.method, params=params, seed=args.seed)
    assignment = bench_mod.apply_cluster_spec(coords, spec)
    Path(args.out).write_text(assignment.to_json() + "\n", encoding="utf-8")
    print(
        f"{assignment.n_clusters} clusters, "
        f"{assignment.outlier_ratio:.1%} outliers -> {args.out}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    assignment = ClusterAssignment.from_json_obj(
        json.loads(Path(args.labels).read_text(encoding="utf-8"))
    )
    subset = IndexSubset.load(args.subset)
    coords = None
    if args.space:
        coords = read_matrix(Path(args.space) / "embeddings.zseb").astype(np.float64)
    mode = MODE_EXCLUDE if args.outlier_mode == "exclude" else MODE_SINGLETONS
    if len(assignment.labels) != len(subset.species):
        raise ValidationError(
            f"labels cover {len(assignment.labels)} rows, subset has "
            f"{len(subset.species)}"
        )
    report = compute_report(
        assignment.labels,
        subset.species,
        coords=coords,
        outlier_mode=mode,
        ii_threshold=args.ii_threshold,
        ecc_threshold=args.ecc_threshold,
    )
    obj = report.to_json_obj()
    if args.fate_threshold is not None:
        obj["species_fate"] = species_fate(
            assignment.labels, subset.species, args.fate_threshold
        )
    if coords is not None and coords.shape[1] == 2:
        obj["cluster_geometry"] = [
            g.to_json_obj()
            for g in cluster_geometry(coords, assignment.labels, subset.species)
        ]
    text = json.dumps(obj, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def make_desk_preset(out_dir: str | Path) -> Path:
    """Synthetic 3-species bank plus a config whose full grid runs in
    minutes; returns the config path. Paths inside the config are
    relative to it, so the preset directory can be checked in or moved."""
    out = Path(out_dir)
    bank_dir = out / "bank"
    bank, manifest = make_synthetic_bank(
        n_species=3, per_species=50, dim=8, seed=7, model_tag="synthetic-desk"
    )
    write_bank(bank, manifest, bank_dir)
    clusterings = [
        bench_mod.ClusterSpec(
            method="hdbscan", params={"min_cluster_size": 15, "min_samples": 5}
        ),
        bench_mod.ClusterSpec(
            method="dbscan", params={"eps_multiplier": 1.0, "min_samples": 5}
        ),
    ]
    for k in (2, 3, 5, 6, 9):
        clusterings.append(bench_mod.ClusterSpec(method="ward", params={"k": k}))
    for k in (2, 3, 5, 6, 9):
        clusterings.append(
            bench_mod.ClusterSpec(method="gmm", params={"k": k}, seed=42)
        )
    config = bench_mod.BenchConfig(
        bank_paths={"synthetic-desk": "bank"},
        scenario=SamplingScenario(
            kind="even", per_species=40, min_per_species=10, n_species=3, seed=11
        ),
        output_dir="runs",
        n_runs=2,
        clusterings=clusterings,
    )
    config_path = out / "config.json"
    config.save(config_path)
    return config_path


def _cmd_bench(args) -> int:
    if args.init_desk:
        config_path = make_desk_preset(args.init_desk)
        print(f"desk preset -> {config_path}")
        return EXIT_OK
    if not args.config:
        raise _UsageError("--config is required (or use --init-desk)")
    config = bench_mod.BenchConfig.load(args.config)
    desc = config.describe()
    print(
        f"grid: {desc['n_runs']} runs x {desc['n_models']} models x "
        f"{desc['n_reductions']} reductions x {desc['n_clusterings']} clusterings "
        f"= {desc['reduced_cells']} cells + {desc['raw_cells']} raw "
        f"= {desc['total_cells']} total"
    )
    if args.plan:
        return EXIT_OK
    records = bench_mod.run_grid(config, jobs=args.jobs, progress=args.progress)
    print(f"{len(records)} new records -> {Path(config.output_dir) / 'runs.jsonl'}")
    return EXIT_OK


def _cmd_count_experiment(args) -> int:
    bank, manifest = read_bank(args.bank)
    n_values = [int(v) for v in args.n_values.split(",") if v.strip()]
    recipe = None
    if args.reduce_method != "none":
        recipe = ReductionRecipe(method=args.reduce_method, target_dim=2)
    spec = bench_mod.ClusterSpec(
        method="hdbscan",
        params={
            "min_cluster_size": args.min_cluster_size,
            "min_samples": args.min_samples,
        },
    )
    results = bench_mod.cluster_count_experiment(
        bank,
        manifest,
        n_values,
        runs_per_n=args.runs_per_n,
        recipe=recipe,
        spec=spec,
        per_species=args.per_species,
        min_per_species=args.min_per_species,
        seed=args.seed,
    )
    text = json.dumps(results, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if args.figure:
        report_mod.figure_count_experiment(results, args.figure)
    return EXIT_OK


def _cmd_plot(args) -> int:
    coords = read_matrix(Path(args.space) / "embeddings.zseb").astype(np.float64)
    assignment = ClusterAssignment.from_json_obj(
        json.loads(Path(args.labels).read_text(encoding="utf-8"))
    )
    subset = IndexSubset.load(args.subset)
    emit_scatter_svg(coords, assignment.labels, subset.species, args.out)
    print(f"scatter -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    records = bench_mod.read_log(args.log)
    if not records:
        raise ValidationError(f"no records in {args.log}")
    group_by = [g.strip() for g in args.group_by.split(",") if g.strip()]
    rows = report_mod.write_report(
        records, group_by, args.out, true_count=args.true_count
    )
    print(report_mod.render_text_table(
        rows,
        [c for c in (group_by + ["n_records", "failures", "v_measure_mean",
                                 "v_measure_sd", "ami_mean", "n_clusters_mean",
                                 "outlier_ratio_mean"]) if rows and c in rows[0]],
    ))
    print(f"report bundle -> {args.out}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "sample": _cmd_sample,
    "reduce": _cmd_reduce,
    "cluster": _cmd_cluster,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "count-experiment": _cmd_count_experiment,
    "plot": _cmd_plot,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        FormatError,
        ValidationError,
        ScenarioError,
        DegenerateInputError,
        UndefinedMetricError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
