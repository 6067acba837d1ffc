"""Embedding-bank interchange format: binary matrix + JSONL manifest.

A bank directory holds two files:

* ``embeddings.zseb`` (little-endian): magic ``ZSEB`` (4 bytes),
  format version u16 = 1, dtype u8 = 0 (f32), reserved u8 = 0,
  n_rows u64, dim u32, then n_rows*dim f32 values row-major.
  Header is 20 bytes; total size is checked against the declared
  shape before anything is allocated from the length fields.
* ``manifest.jsonl``: UTF-8, one JSON object per matrix row, keys
  ``image_id``, ``species``, ``taxon_class``, ``source_code``,
  ``location_id`` (nullable), ``validated`` (bool).

Banks are immutable after load and safe to share across workers.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"ZSEB"
FORMAT_VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sHBBQI")  # 20 bytes
HEADER_SIZE = _HEADER.size

EMBEDDINGS_FILE = "embeddings.zseb"
MANIFEST_FILE = "manifest.jsonl"

TAXON_CLASSES = ("Aves", "Mammalia", "Other")

# Row limit guarding against hostile headers: a bank larger than this
# cannot be legitimate input for this toolkit.
_MAX_ELEMENTS = 1 << 40


@dataclass(frozen=True)
class ManifestRecord:
    """Ground-truth row aligned with one matrix row."""

    image_id: str
    species: str
    taxon_class: str
    source_code: str
    location_id: Optional[str] = None
    validated: bool = True

    def to_json_obj(self) -> dict:
        return {
            "image_id": self.image_id,
            "species": self.species,
            "taxon_class": self.taxon_class,
            "source_code": self.source_code,
            "location_id": self.location_id,
            "validated": self.validated,
        }

    @classmethod
    def from_json_obj(cls, obj: dict, lineno: int = -1) -> "ManifestRecord":
        where = f"manifest line {lineno}" if lineno >= 0 else "manifest record"
        missing = {"image_id", "species", "taxon_class", "source_code"} - obj.keys()
        if missing:
            raise ValidationError(f"{where}: missing keys {sorted(missing)}")
        if not obj["species"]:
            raise ValidationError(f"{where}: species must be non-empty")
        if obj["taxon_class"] not in TAXON_CLASSES:
            raise ValidationError(
                f"{where}: taxon_class {obj['taxon_class']!r} not one of {TAXON_CLASSES}"
            )
        validated = obj.get("validated", True)
        if not isinstance(validated, bool):
            raise ValidationError(f"{where}: validated must be a boolean")
        return cls(
            image_id=str(obj["image_id"]),
            species=str(obj["species"]),
            taxon_class=str(obj["taxon_class"]),
            source_code=str(obj["source_code"]),
            location_id=obj.get("location_id"),
            validated=validated,
        )


@dataclass
class EmbeddingBank:
    """N x D float32 matrix of image embeddings."""

    data: np.ndarray  # (n_rows, dim) float32
    model_tag: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValidationError("embedding matrix must be 2-dimensional")

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def check(self) -> None:
        """Raise unless every bank invariant holds."""
        if self.n_rows < 1 or self.dim < 1:
            raise ValidationError(
                f"bank must be at least 1x1, got {self.n_rows}x{self.dim}"
            )
        if not np.isfinite(self.data).all():
            bad = np.argwhere(~np.isfinite(self.data))[0]
            raise ValidationError(
                f"non-finite value at row {bad[0]}, column {bad[1]}"
            )


@dataclass
class ValidationSummary:
    """Report produced by validate_bank; never raises."""

    n_rows: int
    dim: int
    model_tag: str
    n_species: int
    species_counts: dict[str, int]
    class_counts: dict[str, int]
    min_per_species: int
    max_per_species: int
    duplicate_ids: list[str]
    nonfinite_rows: list[int]
    unvalidated_count: int
    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues and not self.duplicate_ids and not self.nonfinite_rows

    def to_json_obj(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "dim": self.dim,
            "model_tag": self.model_tag,
            "n_species": self.n_species,
            "species_counts": dict(sorted(self.species_counts.items())),
            "class_counts": dict(sorted(self.class_counts.items())),
            "min_per_species": self.min_per_species,
            "max_per_species": self.max_per_species,
            "duplicate_ids": self.duplicate_ids,
            "nonfinite_rows": self.nonfinite_rows,
            "unvalidated_count": self.unvalidated_count,
            "issues": self.issues,
            "ok": self.ok,
        }


def write_bank(
    bank: EmbeddingBank, manifest: Sequence[ManifestRecord], path: str | Path
) -> None:
    """Write ``embeddings.zseb`` + ``manifest.jsonl`` into directory ``path``.

    Round-trips bit-exactly through read_bank.
    """
    bank.check()
    if len(manifest) != bank.n_rows:
        raise FormatError(
            f"manifest has {len(manifest)} records but matrix has {bank.n_rows} rows"
        )
    seen: set[str] = set()
    for rec in manifest:
        if not rec.species:
            raise ValidationError(f"record {rec.image_id!r}: species must be non-empty")
        if rec.taxon_class not in TAXON_CLASSES:
            raise ValidationError(
                f"record {rec.image_id!r}: taxon_class {rec.taxon_class!r} invalid"
            )
        if rec.image_id in seen:
            raise ValidationError(f"duplicate image_id {rec.image_id!r}")
        seen.add(rec.image_id)

    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F32, 0, bank.n_rows, bank.dim)
    with open(directory / EMBEDDINGS_FILE, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(bank.data, dtype="<f4").tobytes())
    with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        for rec in manifest:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


def read_bank(
    path: str | Path, model_tag: Optional[str] = None
) -> tuple[EmbeddingBank, list[ManifestRecord]]:
    """Load a bank directory, validating every invariant.

    The matrix buffer is sized from the actual file length, never from
    the header alone, so hostile length fields cannot trigger large
    allocations.
    """
    directory = Path(path)
    emb_path = directory / EMBEDDINGS_FILE
    man_path = directory / MANIFEST_FILE
    if not emb_path.is_file():
        raise FormatError(f"missing {emb_path}")
    if not man_path.is_file():
        raise FormatError(f"missing {man_path}")

    file_size = os.path.getsize(emb_path)
    if file_size < HEADER_SIZE:
        raise FormatError(f"{emb_path}: {file_size} bytes is too short for a header")
    with open(emb_path, "rb") as fh:
        magic, version, dtype, _reserved, n_rows, dim = _HEADER.unpack(
            fh.read(HEADER_SIZE)
        )
        if magic != MAGIC:
            raise FormatError(f"{emb_path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{emb_path}: unsupported format version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"{emb_path}: unsupported dtype code {dtype}")
        if n_rows < 1 or dim < 1:
            raise FormatError(f"{emb_path}: declared shape {n_rows}x{dim} is empty")
        if n_rows * dim > _MAX_ELEMENTS:
            raise FormatError(f"{emb_path}: declared shape {n_rows}x{dim} implausible")
        expected = HEADER_SIZE + n_rows * dim * 4
        if file_size < expected:
            raise FormatError(
                f"{emb_path}: truncated, {file_size} bytes but shape needs {expected}"
            )
        if file_size > expected:
            raise FormatError(
                f"{emb_path}: {file_size - expected} trailing bytes after matrix"
            )
        raw = fh.read(expected - HEADER_SIZE)
    data = np.frombuffer(raw, dtype="<f4").reshape(n_rows, dim)

    manifest: list[ManifestRecord] = []
    with open(man_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{man_path}: line {lineno}: {exc}") from exc
            manifest.append(ManifestRecord.from_json_obj(obj, lineno))

    if len(manifest) != n_rows:
        raise ValidationError(
            f"{man_path}: {len(manifest)} records but matrix has {n_rows} rows"
        )
    bank = EmbeddingBank(data=data.copy(), model_tag=model_tag or directory.name)
    bank.check()
    # Banks are immutable after load: workers share them read-only.
    bank.data.flags.writeable = False
    ids = Counter(rec.image_id for rec in manifest)
    dups = [i for i, c in ids.items() if c > 1]
    if dups:
        raise ValidationError(f"duplicate image_id values: {sorted(dups)[:5]}")
    return bank, manifest


def validate_bank(
    bank: EmbeddingBank, manifest: Sequence[ManifestRecord]
) -> ValidationSummary:
    """Summarize a (bank, manifest) pair: species counts per taxon class,
    duplicate ids, non-finite rows. Reports, never throws."""
    issues: list[str] = []
    if len(manifest) != bank.n_rows:
        issues.append(
            f"manifest has {len(manifest)} records but matrix has {bank.n_rows} rows"
        )
    species_counts = Counter(rec.species for rec in manifest)
    class_counts = Counter(rec.taxon_class for rec in manifest)
    id_counts = Counter(rec.image_id for rec in manifest)
    duplicate_ids = sorted(i for i, c in id_counts.items() if c > 1)
    finite = np.isfinite(bank.data).all(axis=1)
    nonfinite_rows = [int(i) for i in np.flatnonzero(~finite)]
    unvalidated = sum(1 for rec in manifest if not rec.validated)
    counts = list(species_counts.values())
    return ValidationSummary(
        n_rows=bank.n_rows,
        dim=bank.dim,
        model_tag=bank.model_tag,
        n_species=len(species_counts),
        species_counts=dict(species_counts),
        class_counts=dict(class_counts),
        min_per_species=min(counts) if counts else 0,
        max_per_species=max(counts) if counts else 0,
        duplicate_ids=duplicate_ids,
        nonfinite_rows=nonfinite_rows,
        unvalidated_count=unvalidated,
        issues=issues,
    )


def write_matrix(path: str | Path, data: np.ndarray) -> None:
    """Bare zseb file (no manifest), e.g. for reduced coordinates."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValidationError(f"matrix must be 2D and non-empty, got {data.shape}")
    if not np.isfinite(data).all():
        raise ValidationError("matrix contains non-finite values")
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, DTYPE_F32, 0, data.shape[0], data.shape[1]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a bare zseb file written by write_matrix."""
    path = Path(path)
    file_size = os.path.getsize(path)
    if file_size < HEADER_SIZE:
        raise FormatError(f"{path}: too short for a header")
    with open(path, "rb") as fh:
        magic, version, dtype, _r, n_rows, dim = _HEADER.unpack(fh.read(HEADER_SIZE))
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION or dtype != DTYPE_F32:
            raise FormatError(f"{path}: unsupported version/dtype {version}/{dtype}")
        expected = HEADER_SIZE + n_rows * dim * 4
        if file_size != expected:
            raise FormatError(f"{path}: size {file_size}, expected {expected}")
        raw = fh.read(expected - HEADER_SIZE)
    return np.frombuffer(raw, dtype="<f4").reshape(n_rows, dim).copy()


def bank_fingerprint(bank: EmbeddingBank, manifest: Sequence[ManifestRecord]) -> str:
    """Stable short identity for overlap checks and run logs."""
    h = hashlib.sha256()
    h.update(bank.model_tag.encode("utf-8"))
    h.update(struct.pack("<QI", bank.n_rows, bank.dim))
    for rec in manifest:
        h.update(rec.image_id.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()[:16]
