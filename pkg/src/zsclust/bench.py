"""Factorial benchmark runner with durable, resumable run logs.

A grid cell is one (run, model, reduction recipe, clustering spec)
tuple. Cell identity is a stable hash of those coordinates, so
records appended to the JSON-lines log can be skipped on resume and
parallel execution yields the same per-cell results as serial. The
reduction for a cell group is computed once and shared by its twelve
clusterings; per-cell seeds derive from cell coordinates, never from
execution order.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng
from .cluster import auto_epsilon, dbscan, gmm, hdbscan, ward_hierarchical
from .embank import EmbeddingBank, ManifestRecord, read_bank
from .errors import ParameterError, ZsclustError
from .metrics import MODE_EXCLUDE, compute_report
from .reduce import METHOD_RAW, ReductionRecipe, apply_recipe, standardize
from .sampler import IndexSubset, SamplingScenario, gather_coords, sample_subset

SUPERVISED_K_VALUES = (15, 30, 45, 90, 180)


@dataclass(frozen=True)
class ClusterSpec:
    """One clustering configuration of the grid."""

    method: str  # hdbscan | dbscan | ward | gmm
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def fingerprint(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    def label(self) -> str:
        p = self.params
        if self.method == "hdbscan":
            return f"hdbscan({p.get('min_cluster_size', 15)},{p.get('min_samples', 5)})"
        if self.method == "dbscan":
            return f"dbscan({p.get('eps_multiplier', 1.0)},{p.get('min_samples', 5)})"
        if self.method == "ward":
            return f"ward(k={p.get('k')})"
        if self.method == "gmm":
            return f"gmm(k={p.get('k')})"
        return self.method

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "params": dict(sorted(self.params.items())),
            "seed": self.seed,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ClusterSpec":
        return cls(
            method=obj["method"],
            params=dict(obj.get("params", {})),
            seed=obj.get("seed"),
        )


def apply_cluster_spec(coords: np.ndarray, spec: ClusterSpec):
    """Run one clustering configuration on already-reduced coords."""
    p = spec.params
    if spec.method == "hdbscan":
        return hdbscan(
            coords,
            min_cluster_size=int(p.get("min_cluster_size", 15)),
            min_samples=int(p.get("min_samples", 5)),
        )
    if spec.method == "dbscan":
        min_samples = int(p.get("min_samples", 5))
        if "eps" in p:
            eps = float(p["eps"])
        else:
            eps = float(p.get("eps_multiplier", 1.0)) * auto_epsilon(
                coords, min_samples
            )
        return dbscan(coords, eps=eps, min_samples=min_samples)
    if spec.method == "ward":
        return ward_hierarchical(coords, int(p["k"]))
    if spec.method == "gmm":
        return gmm(coords, int(p["k"]), seed=int(spec.seed if spec.seed is not None else 42))
    raise ParameterError(f"unknown clustering method {spec.method!r}")


def default_reductions(base_seed: int = 0, target_dim: int = 2) -> list[ReductionRecipe]:
    """The benchmark's 23 reduction configurations: three deterministic
    methods once each, the two stochastic methods with ten seeds."""
    recipes = [
        ReductionRecipe(method="pca", target_dim=target_dim, seed=base_seed),
        ReductionRecipe(method="isomap", target_dim=target_dim, seed=base_seed,
                        params={"n_neighbors": 15}),
        ReductionRecipe(method="kpca", target_dim=target_dim, seed=base_seed),
    ]
    for s in range(10):
        recipes.append(
            ReductionRecipe(
                method="tsne", target_dim=target_dim,
                seed=rng.derive_key(base_seed, "tsne", str(s)) % (1 << 31),
                params={"perplexity": 30.0},
            )
        )
    for s in range(10):
        recipes.append(
            ReductionRecipe(
                method="umap", target_dim=target_dim,
                seed=rng.derive_key(base_seed, "umap", str(s)) % (1 << 31),
                params={"n_neighbors": 15, "min_dist": 0.1},
            )
        )
    return recipes


def default_clusterings() -> list[ClusterSpec]:
    """The benchmark's 12 clustering configurations."""
    specs = [
        ClusterSpec(method="hdbscan", params={"min_cluster_size": 15, "min_samples": 5}),
        ClusterSpec(method="dbscan", params={"eps_multiplier": 1.0, "min_samples": 5}),
    ]
    for k in SUPERVISED_K_VALUES:
        specs.append(ClusterSpec(method="ward", params={"k": k}))
    for k in SUPERVISED_K_VALUES:
        specs.append(ClusterSpec(method="gmm", params={"k": k}, seed=42))
    return specs


@dataclass
class BenchConfig:
    """One cell grid: banks x runs x reductions x clusterings."""

    bank_paths: dict[str, str]  # model_tag -> bank directory
    scenario: SamplingScenario
    output_dir: str
    n_runs: int = 10
    reductions: list[ReductionRecipe] = field(default_factory=default_reductions)
    clusterings: list[ClusterSpec] = field(default_factory=default_clusterings)
    include_raw: bool = True
    standardize_before_reduce: bool = True
    standardize_raw: bool = True
    outlier_mode: str = MODE_EXCLUDE

    def all_reductions(self) -> list[ReductionRecipe]:
        out = list(self.reductions)
        if self.include_raw:
            out.append(ReductionRecipe(method=METHOD_RAW, target_dim=1))
        return out

    def describe(self) -> dict:
        n_models = len(self.bank_paths)
        reduced = self.n_runs * n_models * len(self.reductions) * len(self.clusterings)
        raw = (
            self.n_runs * n_models * len(self.clusterings) if self.include_raw else 0
        )
        return {
            "n_runs": self.n_runs,
            "n_models": n_models,
            "n_reductions": len(self.reductions),
            "n_clusterings": len(self.clusterings),
            "reduced_cells": reduced,
            "raw_cells": raw,
            "total_cells": reduced + raw,
        }

    def to_json_obj(self) -> dict:
        return {
            "bank_paths": dict(sorted(self.bank_paths.items())),
            "scenario": self.scenario.to_json_obj(),
            "output_dir": self.output_dir,
            "n_runs": self.n_runs,
            "reductions": [r.to_json_obj() for r in self.reductions],
            "clusterings": [c.to_json_obj() for c in self.clusterings],
            "include_raw": self.include_raw,
            "standardize_before_reduce": self.standardize_before_reduce,
            "standardize_raw": self.standardize_raw,
            "outlier_mode": self.outlier_mode,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_obj(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BenchConfig":
        return cls(
            bank_paths=dict(obj["bank_paths"]),
            scenario=SamplingScenario.from_json_obj(obj["scenario"]),
            output_dir=obj["output_dir"],
            n_runs=int(obj.get("n_runs", 10)),
            reductions=[
                ReductionRecipe.from_json_obj(r) for r in obj["reductions"]
            ],
            clusterings=[ClusterSpec.from_json_obj(c) for c in obj["clusterings"]],
            include_raw=bool(obj.get("include_raw", True)),
            standardize_before_reduce=bool(obj.get("standardize_before_reduce", True)),
            standardize_raw=bool(obj.get("standardize_raw", True)),
            outlier_mode=obj.get("outlier_mode", MODE_EXCLUDE),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        """Read a config; relative paths resolve against the config's
        own directory, so checked-in presets run from anywhere."""
        path = Path(path)
        config = cls.from_json_obj(json.loads(path.read_text(encoding="utf-8")))
        base = path.parent
        config.bank_paths = {
            tag: str(p if (p := Path(raw)).is_absolute() else base / p)
            for tag, raw in config.bank_paths.items()
        }
        out = Path(config.output_dir)
        if not out.is_absolute():
            config.output_dir = str(base / out)
        return config


def cell_key(run_index: int, model_tag: str, recipe: ReductionRecipe, spec: ClusterSpec) -> str:
    """Stable identity of one grid cell, independent of execution order."""
    payload = json.dumps(
        [run_index, model_tag, recipe.to_json_obj(), spec.to_json_obj()],
        sort_keys=True,
    )
    return f"{rng.derive_key(0, 'cell', payload):016x}"


def cell_seed(run_index: int, model_tag: str, recipe: ReductionRecipe, spec: ClusterSpec) -> int:
    payload = json.dumps(
        [run_index, model_tag, recipe.to_json_obj(), spec.to_json_obj()],
        sort_keys=True,
    )
    return rng.derive_key(0, "cell-seed", payload) % (1 << 31)


@dataclass
class RunRecord:
    """Outcome of one grid cell; failures are first-class."""

    cell: str
    run_index: int
    model_tag: str
    subset_seed: int
    subset_hash: str
    recipe: dict
    clustering: dict
    wall_time: float
    n_clusters: Optional[int] = None
    metrics: Optional[dict] = None
    error: Optional[dict] = None

    def to_json_obj(self) -> dict:
        return {
            "cell": self.cell,
            "run_index": self.run_index,
            "model_tag": self.model_tag,
            "subset_seed": self.subset_seed,
            "subset_hash": self.subset_hash,
            "recipe": self.recipe,
            "clustering": self.clustering,
            "wall_time": self.wall_time,
            "n_clusters": self.n_clusters,
            "metrics": self.metrics,
            "error": self.error,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RunRecord":
        return cls(**{k: obj.get(k) for k in (
            "cell", "run_index", "model_tag", "subset_seed", "subset_hash",
            "recipe", "clustering", "wall_time", "n_clusters", "metrics", "error",
        )})


def read_log(path: str | Path) -> list[RunRecord]:
    records = []
    p = Path(path)
    if not p.is_file():
        return records
    with open(p, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RunRecord.from_json_obj(json.loads(line)))
    return records


def _subset_hash(subset: IndexSubset) -> str:
    payload = json.dumps(
        [list(subset.bank_keys), [int(i) for i in subset.indices]]
    )
    return f"{rng.derive_key(0, 'subset', payload):016x}"


def run_seed(scenario_seed: int, run_index: int) -> int:
    return rng.derive_key(scenario_seed, "run", str(run_index)) % (1 << 31)


_BANK_CACHE: dict[str, tuple[EmbeddingBank, list[ManifestRecord]]] = {}


def _load_bank(path: str, model_tag: str) -> tuple[EmbeddingBank, list[ManifestRecord]]:
    if path not in _BANK_CACHE:
        _BANK_CACHE[path] = read_bank(path, model_tag=model_tag)
    return _BANK_CACHE[path]


def _run_group(args: dict) -> list[dict]:
    """One (run, model, reduction) group: sample, reduce once, run
    every pending clustering. Returns RunRecord JSON objects."""
    bank, manifest = _load_bank(args["bank_path"], args["model_tag"])
    scenario = SamplingScenario.from_json_obj(args["scenario"])
    seed = run_seed(scenario.seed, args["run_index"])
    scenario = replace(scenario, seed=seed)
    subset = sample_subset(bank, manifest, scenario)
    coords = gather_coords(subset, {subset.bank_keys[0]: bank}).astype(np.float64)

    recipe = ReductionRecipe.from_json_obj(args["recipe"])
    records: list[dict] = []
    try:
        if recipe.method == METHOD_RAW:
            base = standardize(coords) if args["standardize_raw"] else coords
            reduced_coords = base
        else:
            base = standardize(coords) if args["standardize_before_reduce"] else coords
            reduced_coords = apply_recipe(base, recipe).coords
        reduce_error = None
    except ZsclustError as exc:
        reduce_error = {"kind": type(exc).__name__, "message": str(exc)}
        reduced_coords = None

    for spec_obj in args["clusterings"]:
        spec = ClusterSpec.from_json_obj(spec_obj)
        key = cell_key(args["run_index"], args["model_tag"], recipe, spec)
        start = time.perf_counter()
        n_clusters = None
        metrics_obj = None
        error = reduce_error
        if reduce_error is None:
            try:
                assignment = apply_cluster_spec(reduced_coords, spec)
                report = compute_report(
                    assignment.labels,
                    subset.species,
                    coords=reduced_coords,
                    outlier_mode=args["outlier_mode"],
                )
                n_clusters = assignment.n_clusters
                metrics_obj = report.to_json_obj()
            except ZsclustError as exc:
                error = {"kind": type(exc).__name__, "message": str(exc)}
        records.append(
            RunRecord(
                cell=key,
                run_index=args["run_index"],
                model_tag=args["model_tag"],
                subset_seed=seed,
                subset_hash=_subset_hash(subset),
                recipe=recipe.to_json_obj(),
                clustering=spec.to_json_obj(),
                wall_time=time.perf_counter() - start,
                n_clusters=n_clusters,
                metrics=metrics_obj,
                error=error,
            ).to_json_obj()
        )
    return records


def run_grid(
    config: BenchConfig,
    jobs: int = 1,
    log_name: str = "runs.jsonl",
    progress: bool = False,
) -> list[RunRecord]:
    """Execute every pending grid cell, appending records durably.

    Already-logged cells are skipped by fingerprint, so an interrupted
    grid resumes without duplicates. Per-cell failures are recorded and
    never abort the grid.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / log_name
    done = {r.cell for r in read_log(log_path)}

    groups: list[dict] = []
    for run_index in range(config.n_runs):
        for model_tag, bank_path in sorted(config.bank_paths.items()):
            for recipe in config.all_reductions():
                pending = [
                    spec.to_json_obj()
                    for spec in config.clusterings
                    if cell_key(run_index, model_tag, recipe, spec) not in done
                ]
                if pending:
                    groups.append(
                        {
                            "run_index": run_index,
                            "model_tag": model_tag,
                            "bank_path": bank_path,
                            "scenario": config.scenario.to_json_obj(),
                            "recipe": recipe.to_json_obj(),
                            "clusterings": pending,
                            "outlier_mode": config.outlier_mode,
                            "standardize_before_reduce": config.standardize_before_reduce,
                            "standardize_raw": config.standardize_raw,
                        }
                    )

    new_records: list[RunRecord] = []
    with open(log_path, "a", encoding="utf-8") as log:

        def consume(objs: list[dict]) -> None:
            for obj in objs:
                log.write(json.dumps(obj) + "\n")
                new_records.append(RunRecord.from_json_obj(obj))
            log.flush()

        if jobs <= 1:
            for i, group in enumerate(groups):
                consume(_run_group(group))
                if progress:
                    print(f"[bench] group {i + 1}/{len(groups)} done", flush=True)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for i, objs in enumerate(pool.map(_run_group, groups)):
                    consume(objs)
                    if progress:
                        print(f"[bench] group {i + 1}/{len(groups)} done", flush=True)
    return new_records


def cluster_count_experiment(
    bank: EmbeddingBank,
    manifest: Sequence[ManifestRecord],
    n_values: Sequence[int],
    runs_per_n: int = 100,
    recipe: Optional[ReductionRecipe] = None,
    spec: Optional[ClusterSpec] = None,
    per_species: int = 200,
    min_per_species: int = 20,
    seed: int = 0,
    standardize_input: bool = True,
) -> dict:
    """Predicted-cluster-count protocol: vary the species count n and
    summarize mean +- sd of the prediction and the V-measure."""
    if spec is None:
        spec = ClusterSpec(
            method="hdbscan", params={"min_cluster_size": 15, "min_samples": 5}
        )
    results: dict[int, dict] = {}
    for n in sorted(n_values):
        counts, vs = [], []
        for r in range(runs_per_n):
            s = rng.derive_key(seed, "count-exp", str(n), str(r)) % (1 << 31)
            scenario = SamplingScenario(
                kind="even",
                per_species=per_species,
                min_per_species=min_per_species,
                n_species=n,
                seed=s,
            )
            subset = sample_subset(bank, manifest, scenario)
            coords = gather_coords(subset, {subset.bank_keys[0]: bank}).astype(
                np.float64
            )
            if standardize_input:
                coords = standardize(coords)
            if recipe is not None:
                run_recipe = replace(
                    recipe, seed=rng.derive_key(s, "reduce") % (1 << 31)
                )
                coords = apply_recipe(coords, run_recipe).coords
            assignment = apply_cluster_spec(coords, spec)
            report = compute_report(assignment.labels, subset.species, coords=None)
            counts.append(assignment.n_clusters)
            vs.append(report.v_measure)
        results[n] = {
            "n_species": n,
            "runs": runs_per_n,
            "predicted_mean": float(np.mean(counts)),
            "predicted_sd": float(np.std(counts)),
            "v_measure_mean": float(np.mean(vs)),
            "v_measure_sd": float(np.std(vs)),
        }
    return results
