"""Clustering algorithms with the benchmark's parameterizations.

All four algorithms consume an (N, d) coordinate matrix and produce a
ClusterAssignment: integer labels with -1 reserved for outliers,
cluster ids contiguous from 0 in order of first appearance. Distances
are Euclidean throughout.
"""

from .assignment import AlgorithmInfo, ClusterAssignment, canonical_labels
from .density import auto_epsilon, dbscan
from .gmm import gmm
from .hdbscan import hdbscan
from .hierarchy import ward_hierarchical

__all__ = [
    "AlgorithmInfo",
    "ClusterAssignment",
    "canonical_labels",
    "auto_epsilon",
    "dbscan",
    "gmm",
    "hdbscan",
    "ward_hierarchical",
]
