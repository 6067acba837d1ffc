"""Synthetic blob worlds and banks for desk-scale runs and tests."""

from __future__ import annotations

import numpy as np

from . import rng
from .embank import EmbeddingBank, ManifestRecord


def blob_centers(
    n_blobs: int, dim: int, min_separation: float, seed: int
) -> np.ndarray:
    """Random centers with every pairwise distance >= min_separation."""
    g = rng.stream(seed, "blob-centers")
    scale = min_separation
    while True:
        centers = g.normal(scale=scale, size=(n_blobs, dim))
        sq = ((centers[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(sq, np.inf)
        if np.sqrt(sq.min()) >= min_separation:
            return centers
        scale *= 1.3


def make_blobs(
    sizes: list[int] | np.ndarray,
    dim: int,
    sigma: float = 0.5,
    min_separation: float = 20.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian blobs; returns (points, blob index per point)."""
    sizes = [int(s) for s in sizes]
    centers = blob_centers(len(sizes), dim, min_separation, seed)
    xs, labels = [], []
    for i, size in enumerate(sizes):
        g = rng.stream(seed, "blob", str(i))
        xs.append(centers[i] + g.normal(scale=sigma, size=(size, dim)))
        labels.extend([i] * size)
    return np.vstack(xs), np.asarray(labels, dtype=np.int64)


def make_synthetic_bank(
    n_species: int = 3,
    per_species: int = 50,
    dim: int = 8,
    sigma: float = 0.5,
    min_separation: float = 20.0,
    seed: int = 0,
    taxon_class: str = "Other",
    model_tag: str = "synthetic",
) -> tuple[EmbeddingBank, list[ManifestRecord]]:
    """Blob world packaged as a bank: species_00..., source SYN."""
    points, blob = make_blobs(
        [per_species] * n_species, dim, sigma, min_separation, seed
    )
    manifest = [
        ManifestRecord(
            image_id=f"syn-{i:06d}",
            species=f"species_{int(b):02d}",
            taxon_class=taxon_class,
            source_code="SYN",
            location_id=None,
            validated=True,
        )
        for i, b in enumerate(blob)
    ]
    return EmbeddingBank(data=points.astype(np.float32), model_tag=model_tag), manifest
