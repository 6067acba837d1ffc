"""Seeded per-run image subsets: even, uneven, and extreme distributions.

Row streams are derived per (seed, species name), so sampling one
species never disturbs another and parallel workers agree with serial
runs. Species selection, when fewer than all species are requested,
draws from the parent stream (seed, "species-choice"). For a fixed
(bank, scenario) the resulting subset is byte-identical across
platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng
from .embank import EmbeddingBank, ManifestRecord, bank_fingerprint
from .errors import ScenarioError, ValidationError

KIND_EVEN = "even"
KIND_UNEVEN = "uneven"
KIND_EXTREME = "extreme"
_KINDS = (KIND_EVEN, KIND_UNEVEN, KIND_EXTREME)


@dataclass(frozen=True)
class SamplingScenario:
    """One sampling regime.

    even:    per_species rows from each species (all available if fewer).
    uneven:  per-species target drawn uniformly in [min_per_species,
             max_per_species], then that many rows without replacement.
    extreme: per-species target drawn uniformly in [min_per_species,
             available] (max_per_species ignored, defaults to None).
    """

    kind: str = KIND_EVEN
    per_species: int = 200
    min_per_species: int = 20
    max_per_species: Optional[int] = 200
    n_species: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.min_per_species < 1:
            raise ScenarioError("min_per_species must be >= 1")
        if self.per_species < 1:
            raise ScenarioError("per_species must be >= 1")
        if self.n_species < 2:
            raise ScenarioError("n_species must be >= 2")
        if (
            self.kind == KIND_UNEVEN
            and self.max_per_species is not None
            and self.max_per_species < self.min_per_species
        ):
            raise ScenarioError("max_per_species must be >= min_per_species")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "per_species": self.per_species,
            "min_per_species": self.min_per_species,
            "max_per_species": self.max_per_species,
            "n_species": self.n_species,
            "seed": self.seed,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SamplingScenario":
        return cls(
            kind=obj["kind"],
            per_species=int(obj.get("per_species", 200)),
            min_per_species=int(obj.get("min_per_species", 20)),
            max_per_species=(
                None
                if obj.get("max_per_species") is None
                else int(obj["max_per_species"])
            ),
            n_species=int(obj["n_species"]),
            seed=int(obj["seed"]),
        )


@dataclass
class IndexSubset:
    """Row indices into one or more banks, with ground-truth labels.

    ``bank_keys`` lists the contributing bank fingerprints;
    ``bank_of[i]`` indexes into it for row i, so provenance survives
    combination.
    """

    indices: np.ndarray  # int64 row index into the owning bank
    species: list[str]
    bank_keys: tuple[str, ...]
    bank_of: np.ndarray  # uint16 index into bank_keys
    scenario: Optional[SamplingScenario] = None
    shortfalls: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def rows_for(self, bank_key: str) -> np.ndarray:
        k = self.bank_keys.index(bank_key)
        return self.indices[self.bank_of == k]

    def to_json_obj(self) -> dict:
        return {
            "scenario": self.scenario.to_json_obj() if self.scenario else None,
            "bank_keys": list(self.bank_keys),
            "bank_of": [int(b) for b in self.bank_of],
            "indices": [int(i) for i in self.indices],
            "species": list(self.species),
            "shortfalls": dict(sorted(self.shortfalls.items())),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj()) + "\n", encoding="utf-8")

    @classmethod
    def from_json_obj(cls, obj: dict) -> "IndexSubset":
        return cls(
            indices=np.asarray(obj["indices"], dtype=np.int64),
            species=list(obj["species"]),
            bank_keys=tuple(obj["bank_keys"]),
            bank_of=np.asarray(obj["bank_of"], dtype=np.uint16),
            scenario=(
                SamplingScenario.from_json_obj(obj["scenario"])
                if obj.get("scenario")
                else None
            ),
            shortfalls={k: int(v) for k, v in obj.get("shortfalls", {}).items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "IndexSubset":
        return cls.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _species_pools(
    manifest: Sequence[ManifestRecord], include_unvalidated: bool
) -> dict[str, np.ndarray]:
    pools: dict[str, list[int]] = {}
    for i, rec in enumerate(manifest):
        if not include_unvalidated and not rec.validated:
            continue
        pools.setdefault(rec.species, []).append(i)
    return {s: np.asarray(ix, dtype=np.int64) for s, ix in pools.items()}


def sample_subset(
    bank: EmbeddingBank,
    manifest: Sequence[ManifestRecord],
    scenario: SamplingScenario,
    include_unvalidated: bool = False,
) -> IndexSubset:
    """Draw one seeded subset according to ``scenario``.

    Raises ScenarioError when the bank has fewer distinct species than
    requested, or a selected species has fewer than min_per_species
    eligible rows. When an even/uneven target exceeds availability, all
    available rows are taken and the gap recorded in ``shortfalls``.
    """
    if len(manifest) != bank.n_rows:
        raise ValidationError("manifest length does not match bank rows")
    pools = _species_pools(manifest, include_unvalidated)
    all_species = sorted(pools)
    if len(all_species) < scenario.n_species:
        raise ScenarioError(
            f"bank has {len(all_species)} species, scenario needs {scenario.n_species}"
        )

    if scenario.n_species < len(all_species):
        chooser = rng.stream(scenario.seed, "species-choice")
        picked = chooser.choice(
            len(all_species), size=scenario.n_species, replace=False
        )
        chosen = sorted(all_species[i] for i in picked)
    else:
        chosen = all_species

    for sp in chosen:
        if pools[sp].shape[0] < scenario.min_per_species:
            raise ScenarioError(
                f"species {sp!r} has {pools[sp].shape[0]} eligible rows, "
                f"fewer than min_per_species={scenario.min_per_species}"
            )

    indices: list[np.ndarray] = []
    labels: list[str] = []
    shortfalls: dict[str, int] = {}
    for sp in chosen:
        pool = pools[sp]
        avail = pool.shape[0]
        g = rng.stream(scenario.seed, "rows", sp)
        if scenario.kind == KIND_EVEN:
            target = scenario.per_species
        elif scenario.kind == KIND_UNEVEN:
            hi = avail if scenario.max_per_species is None else scenario.max_per_species
            target = int(g.integers(scenario.min_per_species, hi + 1))
        else:  # extreme
            target = int(g.integers(scenario.min_per_species, avail + 1))
        take = min(target, avail)
        if take < target:
            shortfalls[sp] = target - take
        rows = pool[g.choice(avail, size=take, replace=False)] if take < avail else pool
        rows = np.sort(rows)
        indices.append(rows)
        labels.extend([sp] * take)

    idx = np.concatenate(indices) if indices else np.empty(0, dtype=np.int64)
    return IndexSubset(
        indices=idx,
        species=labels,
        bank_keys=(bank_fingerprint(bank, manifest),),
        bank_of=np.zeros(idx.shape[0], dtype=np.uint16),
        scenario=scenario,
        shortfalls=shortfalls,
    )


def combine_subsets(a: IndexSubset, b: IndexSubset) -> IndexSubset:
    """Concatenate two subsets, preserving labels and row provenance.

    Rows drawn from the same bank must be disjoint; species labels pass
    through unchanged (the combined-class protocol concatenates banks
    with disjoint species namespaces).
    """
    keys = list(a.bank_keys)
    remap = []
    for k in b.bank_keys:
        if k not in keys:
            keys.append(k)
        remap.append(keys.index(k))
    b_of = np.asarray([remap[int(x)] for x in b.bank_of], dtype=np.uint16)

    for k_new, key in enumerate(keys):
        if key in a.bank_keys and key in b.bank_keys:
            rows_a = set(a.indices[a.bank_of == a.bank_keys.index(key)].tolist())
            rows_b = set(b.indices[b_of == k_new].tolist())
            overlap = rows_a & rows_b
            if overlap:
                raise ValidationError(
                    f"bank {key}: {len(overlap)} overlapping rows "
                    f"(e.g. {sorted(overlap)[:3]})"
                )

    return IndexSubset(
        indices=np.concatenate([a.indices, b.indices]),
        species=list(a.species) + list(b.species),
        bank_keys=tuple(keys),
        bank_of=np.concatenate([a.bank_of.astype(np.uint16), b_of]),
        scenario=a.scenario,
        shortfalls={**a.shortfalls, **b.shortfalls},
    )


def gather_coords(subset: IndexSubset, banks: dict[str, EmbeddingBank]) -> np.ndarray:
    """Materialize the subset's embedding rows, in subset order.

    ``banks`` maps bank fingerprint to the loaded bank.
    """
    missing = [k for k in subset.bank_keys if k not in banks]
    if missing:
        raise ValidationError(f"missing banks for keys {missing}")
    dims = {banks[k].dim for k in subset.bank_keys}
    if len(dims) > 1:
        raise ValidationError(f"banks disagree on dim: {sorted(dims)}")
    out = np.empty((len(subset), dims.pop()), dtype=np.float32)
    for k, key in enumerate(subset.bank_keys):
        mask = subset.bank_of == k
        out[mask] = banks[key].data[subset.indices[mask]]
    return out
