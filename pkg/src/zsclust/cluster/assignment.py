"""Cluster assignment container shared by every algorithm."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ValidationError

OUTLIER = -1


@dataclass(frozen=True)
class AlgorithmInfo:
    """Provenance: which algorithm produced the labels, with what."""

    name: str
    params: dict
    seed: Optional[int] = None

    def to_json_obj(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "seed": self.seed}


@dataclass
class ClusterAssignment:
    """Per-row cluster label (-1 = outlier) plus provenance.

    Labels are contiguous 0..n_clusters-1, numbered by first appearance
    in row order; ``check`` enforces this.
    """

    labels: np.ndarray
    algorithm: AlgorithmInfo
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def n_clusters(self) -> int:
        return len(set(int(l) for l in self.labels if l != OUTLIER))

    @property
    def outlier_ratio(self) -> float:
        n = self.labels.shape[0]
        return float((self.labels == OUTLIER).sum()) / n if n else 0.0

    def check(self) -> None:
        if self.labels.ndim != 1:
            raise ValidationError("labels must be 1-dimensional")
        ids = sorted(set(int(l) for l in self.labels if l != OUTLIER))
        if any(l < OUTLIER for l in self.labels):
            raise ValidationError("labels below -1 are not allowed")
        if ids != list(range(len(ids))):
            raise ValidationError(f"cluster ids not contiguous from 0: {ids[:10]}")

    def to_json_obj(self) -> dict:
        return {
            "labels": [int(l) for l in self.labels],
            "n_clusters": self.n_clusters,
            "algorithm": self.algorithm.to_json_obj(),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ClusterAssignment":
        algo = obj.get("algorithm", {})
        return cls(
            labels=np.asarray(obj["labels"], dtype=np.int64),
            algorithm=AlgorithmInfo(
                name=algo.get("name", "unknown"),
                params=algo.get("params", {}),
                seed=algo.get("seed"),
            ),
            diagnostics=obj.get("diagnostics", {}),
        )


def canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Relabel cluster ids to 0..K-1 in order of first appearance,
    leaving -1 untouched."""
    out = np.full(raw.shape[0], OUTLIER, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, l in enumerate(raw):
        l = int(l)
        if l == OUTLIER:
            continue
        if l not in mapping:
            mapping[l] = len(mapping)
        out[i] = mapping[l]
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj
