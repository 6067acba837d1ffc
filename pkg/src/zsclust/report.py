"""Aggregation of run logs into tables and figures.

The report path emits, side by side: machine-readable JSON, delimited
CSV, aligned text tables, and matplotlib PNG figures.
"""

from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import ClusterSpec, RunRecord

METRIC_FIELDS = (
    "v_measure",
    "ami",
    "ari",
    "homogeneity",
    "completeness",
    "purity",
    "silhouette",
    "outlier_ratio",
)

GROUP_KEYS = ("model", "reduction", "clustering", "run")


def _group_value(record: RunRecord, key: str) -> str:
    if key == "model":
        return record.model_tag
    if key == "reduction":
        return record.recipe.get("method", "?")
    if key == "clustering":
        return ClusterSpec.from_json_obj(record.clustering).label()
    if key == "run":
        return f"run{record.run_index}"
    raise ValueError(f"unknown group key {key!r} (choose from {GROUP_KEYS})")


def aggregate(records: Sequence[RunRecord], group_by: Sequence[str]) -> list[dict]:
    """Mean/sd/min/max per group for every metric plus cluster counts.

    Error records count toward ``failures`` and contribute no metric
    values; groups with no successful record are omitted with a warning.
    """
    for key in group_by:
        if key not in GROUP_KEYS:
            raise ValueError(f"unknown group key {key!r} (choose from {GROUP_KEYS})")
    groups: dict[tuple[str, ...], list[RunRecord]] = {}
    for rec in records:
        key = tuple(_group_value(rec, k) for k in group_by)
        groups.setdefault(key, []).append(rec)

    rows: list[dict] = []
    for key in sorted(groups):
        recs = groups[key]
        good = [r for r in recs if r.error is None and r.metrics]
        row: dict = {k: v for k, v in zip(group_by, key)}
        row["n_records"] = len(recs)
        row["failures"] = len(recs) - len(good)
        if not good:
            warnings.warn(
                f"group {key} has no successful records; omitted", stacklevel=2
            )
            continue
        counts = [r.n_clusters for r in good if r.n_clusters is not None]
        row["n_clusters_mean"] = float(np.mean(counts)) if counts else None
        row["n_clusters_sd"] = float(np.std(counts)) if counts else None
        for metric in METRIC_FIELDS:
            vals = [
                r.metrics[metric]
                for r in good
                if r.metrics.get(metric) is not None
            ]
            if vals:
                row[f"{metric}_mean"] = float(np.mean(vals))
                row[f"{metric}_sd"] = float(np.std(vals))
                row[f"{metric}_min"] = float(np.min(vals))
                row[f"{metric}_max"] = float(np.max(vals))
        rows.append(row)
    return rows


def render_text_table(rows: list[dict], columns: Sequence[str] | None = None) -> str:
    """Aligned fixed-width table of the given (or all) columns."""
    if not rows:
        return "(no rows)\n"
    if columns is None:
        columns = list(rows[0].keys())

    def fmt(v) -> str:
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.3f}"
        return str(v)

    cells = [[fmt(row.get(c)) for c in columns] for row in rows]
    widths = [
        max(len(str(c)), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)
    ]
    lines = [
        "  ".join(str(c).ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def write_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    columns: list[str] = []
    for row in rows:
        for c in row:
            if c not in columns:
                columns.append(c)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def figure_metric_by_group(
    rows: list[dict], metric: str, path: str | Path, title: str = ""
) -> None:
    """Bar chart of group means with sd whiskers."""
    labeled = [
        (
            " / ".join(str(row[k]) for k in row if not k.endswith(("_mean", "_sd", "_min", "_max")) and k not in ("n_records", "failures")),
            row.get(f"{metric}_mean"),
            row.get(f"{metric}_sd", 0.0) or 0.0,
        )
        for row in rows
    ]
    labeled = [(l, m, s) for l, m, s in labeled if m is not None]
    if not labeled:
        return
    names, means, sds = zip(*labeled)
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(names)), 4.5))
    xs = np.arange(len(names))
    ax.bar(xs, means, yerr=sds, capsize=3, color="#4e79a7")
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(metric)
    ax.set_title(title or metric)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_cluster_counts(rows: list[dict], path: str | Path, true_count: int | None = None) -> None:
    """Predicted cluster counts per group with sd whiskers."""
    labeled = [
        (
            " / ".join(str(row[k]) for k in row if not k.endswith(("_mean", "_sd", "_min", "_max")) and k not in ("n_records", "failures")),
            row.get("n_clusters_mean"),
            row.get("n_clusters_sd", 0.0) or 0.0,
        )
        for row in rows
    ]
    labeled = [(l, m, s) for l, m, s in labeled if m is not None]
    if not labeled:
        return
    names, means, sds = zip(*labeled)
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(names)), 4.5))
    xs = np.arange(len(names))
    ax.errorbar(xs, means, yerr=sds, fmt="o", capsize=3, color="#e15759")
    if true_count is not None:
        ax.axhline(true_count, linestyle="--", color="gray", label="ground truth")
        ax.legend()
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("clusters found")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_count_experiment(results: dict, path: str | Path) -> None:
    """Mean predicted count vs species count with the ideal diagonal."""
    ns = sorted(int(n) for n in results)
    means = [results[n]["predicted_mean"] for n in ns]
    sds = [results[n]["predicted_sd"] for n in ns]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(ns, means, yerr=sds, fmt="o-", capsize=3, label="predicted")
    ax.plot(ns, ns, "--", color="gray", label="perfect prediction")
    ax.set_xlabel("species count")
    ax.set_ylabel("predicted cluster count")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    records: Sequence[RunRecord],
    group_by: Sequence[str],
    out_dir: str | Path,
    true_count: int | None = None,
) -> list[dict]:
    """Full report bundle: summary.{json,csv,txt} + figures/*.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = aggregate(records, group_by)
    (out / "summary.json").write_text(
        json.dumps(rows, indent=2) + "\n", encoding="utf-8"
    )
    write_csv(rows, out / "summary.csv")
    brief_cols = [c for c in rows[0]] if rows else []
    keep = [
        c
        for c in brief_cols
        if c in group_by
        or c in ("n_records", "failures", "n_clusters_mean", "n_clusters_sd")
        or c.endswith(("_mean", "_sd"))
    ]
    (out / "summary.txt").write_text(
        render_text_table(rows, keep or None), encoding="utf-8"
    )
    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    figure_metric_by_group(rows, "v_measure", figures / "v_measure.png")
    figure_metric_by_group(rows, "ami", figures / "ami.png")
    figure_metric_by_group(rows, "outlier_ratio", figures / "outlier_ratio.png")
    figure_cluster_counts(rows, figures / "cluster_counts.png", true_count)
    return rows
