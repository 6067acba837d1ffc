import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from zsclust.bench import (
    BenchConfig,
    ClusterSpec,
    RunRecord,
    cell_key,
    cluster_count_experiment,
    default_clusterings,
    default_reductions,
    read_log,
    run_grid,
)
from zsclust.embank import write_bank
from zsclust.reduce import ReductionRecipe
from zsclust.report import aggregate, render_text_table, write_report
from zsclust.sampler import SamplingScenario
from zsclust.svgplot import emit_scatter_svg
from zsclust.synth import make_synthetic_bank


def _mini_config(tmp_path, n_runs=1, reductions=None, clusterings=None):
    bank, manifest = make_synthetic_bank(
        n_species=3, per_species=40, dim=6, seed=3, model_tag="mini"
    )
    bank_dir = tmp_path / "bank"
    write_bank(bank, manifest, bank_dir)
    return BenchConfig(
        bank_paths={"mini": str(bank_dir)},
        scenario=SamplingScenario(
            kind="even", per_species=30, min_per_species=5, n_species=3, seed=1
        ),
        output_dir=str(tmp_path / "runs"),
        n_runs=n_runs,
        reductions=reductions
        if reductions is not None
        else [ReductionRecipe(method="pca", target_dim=2)],
        clusterings=clusterings
        if clusterings is not None
        else [ClusterSpec(method="ward", params={"k": 3})],
        include_raw=False,
    )


def test_default_grid_bookkeeping():
    config = BenchConfig(
        bank_paths={f"model{i}": f"/nowhere/{i}" for i in range(5)},
        scenario=SamplingScenario(kind="even", n_species=30, seed=0),
        output_dir="/nowhere/out",
    )
    desc = config.describe()
    assert desc["n_reductions"] == 23
    assert desc["n_clusterings"] == 12
    assert desc["reduced_cells"] == 13_800
    assert desc["raw_cells"] == 600
    assert desc["total_cells"] == 14_400


def test_default_reductions_composition():
    recipes = default_reductions()
    methods = [r.method for r in recipes]
    assert methods.count("pca") == 1
    assert methods.count("isomap") == 1
    assert methods.count("kpca") == 1
    assert methods.count("tsne") == 10
    assert methods.count("umap") == 10
    assert len({r.fingerprint() for r in recipes}) == 23
    specs = default_clusterings()
    assert len(specs) == 12
    assert [s.method for s in specs].count("ward") == 5
    assert [s.method for s in specs].count("gmm") == 5


def test_single_cell_grid(tmp_path):
    config = _mini_config(tmp_path)
    records = run_grid(config)
    assert len(records) == 1
    rec = records[0]
    assert rec.error is None
    assert rec.metrics["v_measure"] == pytest.approx(1.0, abs=1e-9)
    assert rec.n_clusters == 3


def test_resume_no_duplicates(tmp_path):
    reductions = [
        ReductionRecipe(method="pca", target_dim=2),
        ReductionRecipe(method="kpca", target_dim=2),
    ]
    clusterings = [
        ClusterSpec(method="ward", params={"k": 3}),
        ClusterSpec(method="gmm", params={"k": 3}, seed=42),
        ClusterSpec(method="hdbscan", params={"min_cluster_size": 10, "min_samples": 3}),
    ]
    config = _mini_config(tmp_path, n_runs=2, reductions=reductions,
                          clusterings=clusterings)
    total = config.describe()["total_cells"]
    assert total == 12

    run_grid(config)
    log_path = Path(config.output_dir) / "runs.jsonl"
    lines = log_path.read_text().strip().splitlines()
    assert len(lines) == total

    # Simulate a kill at 50%: truncate the log, rerun, expect exactly
    # the missing cells and no duplicates.
    log_path.write_text("\n".join(lines[: total // 2]) + "\n")
    new = run_grid(config)
    assert len(new) == total - total // 2
    records = read_log(log_path)
    cells = [r.cell for r in records]
    assert len(cells) == total
    assert len(set(cells)) == total

    # Records produced before and after the kill agree cell-by-cell.
    by_cell = {}
    for rec in records:
        by_cell[rec.cell] = rec
    fresh_dir = tmp_path / "fresh"
    config2 = _mini_config(tmp_path, n_runs=2, reductions=reductions,
                           clusterings=clusterings)
    config2.output_dir = str(fresh_dir)
    for rec in run_grid(config2):
        assert rec.metrics == by_cell[rec.cell].metrics


def test_failures_are_recorded_not_raised(tmp_path):
    config = _mini_config(
        tmp_path,
        clusterings=[ClusterSpec(method="ward", params={"k": 5000})],
    )
    records = run_grid(config)
    assert len(records) == 1
    assert records[0].error is not None
    assert records[0].error["kind"] == "ParameterError"
    assert records[0].metrics is None


def test_cell_key_depends_on_coordinates():
    recipe = ReductionRecipe(method="pca", target_dim=2)
    spec = ClusterSpec(method="ward", params={"k": 3})
    a = cell_key(0, "m", recipe, spec)
    b = cell_key(1, "m", recipe, spec)
    c = cell_key(0, "other", recipe, spec)
    d = cell_key(0, "m", ReductionRecipe(method="kpca", target_dim=2), spec)
    assert len({a, b, c, d}) == 4
    assert a == cell_key(0, "m", recipe, spec)


def test_parallel_jobs_match_serial(tmp_path):
    reductions = [ReductionRecipe(method="pca", target_dim=2)]
    clusterings = [
        ClusterSpec(method="ward", params={"k": 3}),
        ClusterSpec(method="gmm", params={"k": 3}, seed=42),
    ]
    serial_cfg = _mini_config(tmp_path, n_runs=2, reductions=reductions,
                              clusterings=clusterings)
    serial = {r.cell: r for r in run_grid(serial_cfg)}
    par_cfg = _mini_config(tmp_path, n_runs=2, reductions=reductions,
                           clusterings=clusterings)
    par_cfg.output_dir = str(tmp_path / "runs-par")
    parallel = {r.cell: r for r in run_grid(par_cfg, jobs=2)}
    assert serial.keys() == parallel.keys()
    for cell, rec in serial.items():
        assert parallel[cell].metrics == rec.metrics


def test_aggregate_and_tables(tmp_path):
    config = _mini_config(
        tmp_path,
        n_runs=3,
        clusterings=[
            ClusterSpec(method="ward", params={"k": 3}),
            ClusterSpec(method="gmm", params={"k": 3}, seed=42),
        ],
    )
    records = run_grid(config)
    rows = aggregate(records, ["clustering"])
    assert len(rows) == 2
    for row in rows:
        assert row["n_records"] == 3
        assert row["failures"] == 0
        assert 0.0 <= row["v_measure_mean"] <= 1.0
        assert row["v_measure_sd"] >= 0.0
    single = aggregate(records[:1], ["model"])
    assert single[0]["v_measure_sd"] == 0.0

    text = render_text_table(rows, ["clustering", "v_measure_mean"])
    assert "clustering" in text and "ward(k=3)" in text

    out = write_report(records, ["clustering"], tmp_path / "report", true_count=3)
    assert (tmp_path / "report" / "summary.csv").is_file()
    assert (tmp_path / "report" / "summary.json").is_file()
    assert (tmp_path / "report" / "summary.txt").is_file()
    assert (tmp_path / "report" / "figures" / "v_measure.png").is_file()
    assert (tmp_path / "report" / "figures" / "cluster_counts.png").is_file()
    assert out == rows


def test_aggregate_empty_group_warns():
    rec = RunRecord(
        cell="x", run_index=0, model_tag="m", subset_seed=1, subset_hash="h",
        recipe={"method": "pca"}, clustering={"method": "ward", "params": {"k": 3}},
        wall_time=0.1, error={"kind": "NumericError", "message": "boom"},
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = aggregate([rec], ["model"])
    assert rows == []
    assert any("no successful records" in str(w.message) for w in caught)


def test_mean_sd_values():
    vals = [0.94, 0.95, 0.96]
    recs = []
    for i, v in enumerate(vals):
        recs.append(
            RunRecord(
                cell=f"c{i}", run_index=i, model_tag="m", subset_seed=1,
                subset_hash="h", recipe={"method": "pca"},
                clustering={"method": "ward", "params": {"k": 3}},
                wall_time=0.0, n_clusters=3,
                metrics={"v_measure": v, "ami": v, "ari": v, "homogeneity": v,
                         "completeness": v, "purity": v, "silhouette": None,
                         "outlier_ratio": 0.0},
            )
        )
    row = aggregate(recs, ["model"])[0]
    assert row["v_measure_mean"] == pytest.approx(0.95)
    assert row["v_measure_sd"] == pytest.approx(np.std(vals))
    assert row["v_measure_min"] == 0.94
    assert row["v_measure_max"] == 0.96


def test_scatter_svg(tmp_path):
    coords = np.array([[0.0, 0], [1, 0], [0, 1], [1, 1]])
    labels = [0, 0, 1, -1]
    species = ["a", "a", "b", "b"]
    path = tmp_path / "s.svg"
    emit_scatter_svg(coords, labels, species, path)
    svg = path.read_text()
    assert svg.count("<circle") >= 3  # 3 clustered marks + legend dots
    assert svg.count("<path") == 1  # one outlier cross
    assert "#4e79a7" in svg and "#f28e2b" in svg

    again = tmp_path / "s2.svg"
    emit_scatter_svg(coords, labels, species, again)
    assert path.read_bytes() == again.read_bytes()

    from zsclust.errors import ParameterError

    with pytest.raises(ParameterError):
        emit_scatter_svg(np.zeros((4, 3)), labels, species, tmp_path / "bad.svg")


def test_count_experiment_synthetic():
    bank, manifest = make_synthetic_bank(
        n_species=30, per_species=40, dim=16, seed=9, model_tag="blobs"
    )
    results = cluster_count_experiment(
        bank,
        manifest,
        n_values=[30],
        runs_per_n=3,
        spec=ClusterSpec(method="hdbscan",
                         params={"min_cluster_size": 15, "min_samples": 5}),
        per_species=40,
        min_per_species=10,
        seed=5,
    )
    row = results[30]
    assert abs(row["predicted_mean"] - 30) <= 2
    assert row["v_measure_mean"] > 0.99

    # Only one way to choose 30 species from 30: selection deterministic.
    r2 = cluster_count_experiment(
        bank, manifest, n_values=[30], runs_per_n=2,
        spec=ClusterSpec(method="hdbscan",
                         params={"min_cluster_size": 15, "min_samples": 5}),
        per_species=40, min_per_species=10, seed=6,
    )
    assert r2[30]["runs"] == 2

    from zsclust.errors import ScenarioError

    with pytest.raises(ScenarioError):
        cluster_count_experiment(
            bank, manifest, n_values=[40], runs_per_n=1,
            per_species=10, min_per_species=5, seed=0,
        )
