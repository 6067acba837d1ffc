"""Recipe and result types shared by all reduction methods."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ParameterError, ValidationError

METHOD_RAW = "raw"
METHOD_PCA = "pca"
METHOD_KPCA = "kpca"
METHOD_ISOMAP = "isomap"
METHOD_TSNE = "tsne"
METHOD_UMAP = "umap"
METHODS = (METHOD_RAW, METHOD_PCA, METHOD_KPCA, METHOD_ISOMAP, METHOD_TSNE, METHOD_UMAP)


@dataclass(frozen=True)
class ReductionRecipe:
    """Which reduction to run and with what parameters.

    ``params`` carries the method-specific knobs (perplexity,
    n_neighbors, min_dist, gamma, ...); missing entries fall back to
    the benchmark defaults.
    """

    method: str
    target_dim: int = 2
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ParameterError(f"unknown reduction method {self.method!r}")
        if self.target_dim < 1:
            raise ParameterError("target_dim must be >= 1")

    def param(self, name: str, default):
        return self.params.get(name, default)

    def fingerprint(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "target_dim": self.target_dim,
            "seed": self.seed,
            "params": dict(sorted(self.params.items())),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ReductionRecipe":
        return cls(
            method=obj["method"],
            target_dim=int(obj.get("target_dim", 2)),
            seed=int(obj.get("seed", 0)),
            params=dict(obj.get("params", {})),
        )


@dataclass
class ReducedSpace:
    """Projected coordinates plus the recipe that produced them."""

    coords: np.ndarray
    recipe: ReductionRecipe
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if not np.isfinite(self.coords).all():
            raise ValidationError("reduced coordinates contain non-finite values")

    def save(self, directory) -> None:
        """Write coords as embeddings.zseb plus a recipe.json sidecar."""
        from pathlib import Path

        from ..embank import write_matrix

        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(out / "embeddings.zseb", self.coords)
        (out / "recipe.json").write_text(
            json.dumps(
                {"recipe": self.recipe.to_json_obj(), "diagnostics": self.diagnostics},
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, directory) -> "ReducedSpace":
        from pathlib import Path

        from ..embank import read_matrix

        d = Path(directory)
        sidecar = json.loads((d / "recipe.json").read_text(encoding="utf-8"))
        return cls(
            coords=read_matrix(d / "embeddings.zseb").astype(np.float64),
            recipe=ReductionRecipe.from_json_obj(sidecar["recipe"]),
            diagnostics=sidecar.get("diagnostics", {}),
        )


def raw_passthrough(x: np.ndarray) -> ReducedSpace:
    """Identity reduction: clustering happens in the original space."""
    x = np.asarray(x, dtype=np.float64)
    return ReducedSpace(
        coords=x.copy(),
        recipe=ReductionRecipe(method=METHOD_RAW, target_dim=int(x.shape[1])),
        diagnostics={},
    )


def apply_recipe(x: np.ndarray, recipe: ReductionRecipe) -> ReducedSpace:
    """Dispatch a recipe to its method implementation."""
    from .isomap import isomap
    from .linear import kernel_pca, pca
    from .tsne import tsne
    from .umap import umap

    if recipe.method == METHOD_RAW:
        return raw_passthrough(x)
    if recipe.method == METHOD_PCA:
        return pca(x, recipe.target_dim, seed=recipe.seed)
    if recipe.method == METHOD_KPCA:
        gamma = recipe.param("gamma", None)
        if gamma is None:
            gamma = 1.0 / x.shape[1]
        return kernel_pca(x, recipe.target_dim, gamma=gamma, seed=recipe.seed)
    if recipe.method == METHOD_ISOMAP:
        return isomap(
            x,
            recipe.target_dim,
            n_neighbors=recipe.param("n_neighbors", 15),
            seed=recipe.seed,
            on_disconnect=recipe.param("on_disconnect", "bridge"),
        )
    if recipe.method == METHOD_TSNE:
        return tsne(
            x,
            recipe.target_dim,
            perplexity=recipe.param("perplexity", 30.0),
            seed=recipe.seed,
        )
    if recipe.method == METHOD_UMAP:
        return umap(
            x,
            recipe.target_dim,
            n_neighbors=recipe.param("n_neighbors", 15),
            min_dist=recipe.param("min_dist", 0.1),
            seed=recipe.seed,
        )
    raise ParameterError(f"unknown reduction method {recipe.method!r}")
