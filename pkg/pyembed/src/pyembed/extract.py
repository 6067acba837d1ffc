"""Batch extraction of image-crop embeddings into a zseb bank.

Input: a directory of crops plus a label CSV with columns image_path,
image_id, species, taxon_class, source_code, location_id, validated.
Output: a bank directory (embeddings.zseb + manifest.jsonl) with one
row per decodable image in sorted-image_id order, and an
extraction.json sidecar recording the checkpoint, the exact
preprocessing recipe, and any skipped files. Shuffling the CSV row
order does not change a byte of the output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import load_encoder
from .zseb import write_bank_dir

CSV_COLUMNS = (
    "image_path",
    "image_id",
    "species",
    "taxon_class",
    "source_code",
    "location_id",
    "validated",
)

_TRUE = {"true", "1", "yes"}
_FALSE = {"false", "0", "no"}


@dataclass
class ExtractionJob:
    model_id: str
    input_dir: str
    labels_csv: str
    output_dir: str
    batch_size: int = 32
    device: str = "cpu"
    expected_dim: int | None = None


@dataclass
class ExtractionResult:
    output_dir: str
    n_rows: int
    dim: int
    skipped: list[dict] = field(default_factory=list)


def _parse_bool(value: str, where: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"{where}: cannot parse validated flag {value!r}")


def read_labels(labels_csv: str | Path) -> list[dict]:
    rows = []
    with open(labels_csv, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"label CSV missing columns {sorted(missing)}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw["image_id"]:
                raise ValueError(f"line {lineno}: empty image_id")
            if not raw["species"]:
                raise ValueError(f"line {lineno}: empty species")
            rows.append(
                {
                    "image_path": raw["image_path"],
                    "image_id": raw["image_id"],
                    "species": raw["species"],
                    "taxon_class": raw["taxon_class"],
                    "source_code": raw["source_code"],
                    "location_id": raw["location_id"] or None,
                    "validated": _parse_bool(raw["validated"], f"line {lineno}"),
                }
            )
    ids = [r["image_id"] for r in rows]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise ValueError(f"duplicate image_id values: {sorted(dupes)[:5]}")
    return rows


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run the extraction job; returns the bank location and skip list."""
    encoder = load_encoder(job.model_id)
    if job.expected_dim is not None and encoder.info.dim != job.expected_dim:
        raise ValueError(
            f"checkpoint {job.model_id} is {encoder.info.dim}-wide, "
            f"job expects {job.expected_dim}"
        )

    rows = sorted(read_labels(job.labels_csv), key=lambda r: r["image_id"])
    input_dir = Path(job.input_dir)

    kept_rows: list[dict] = []
    images: list[Image.Image] = []
    skipped: list[dict] = []
    for row in rows:
        path = Path(row["image_path"])
        if not path.is_absolute():
            path = input_dir / path
        try:
            with Image.open(path) as img:
                images.append(img.convert("RGB"))
            kept_rows.append(row)
        except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
            skipped.append(
                {"image_id": row["image_id"], "path": str(path), "reason": str(exc)}
            )
    if not kept_rows:
        raise ValueError("no decodable images in the job")

    chunks = []
    for start in range(0, len(images), job.batch_size):
        chunks.append(encoder.encode(images[start : start + job.batch_size]))
    matrix = np.vstack(chunks)

    manifest_rows = [{k: r[k] for k in r if k != "image_path"} for r in kept_rows]
    write_bank_dir(job.output_dir, matrix, manifest_rows)

    sidecar = {
        "model_id": encoder.info.model_id,
        "dim": encoder.info.dim,
        "preprocessing": encoder.info.preprocessing,
        "pooling": encoder.info.pooling,
        "batch_size": job.batch_size,
        "device": job.device,
        "n_rows": len(kept_rows),
        "skipped": skipped,
    }
    (Path(job.output_dir) / "extraction.json").write_text(
        json.dumps(sidecar, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return ExtractionResult(
        output_dir=job.output_dir,
        n_rows=len(kept_rows),
        dim=encoder.info.dim,
        skipped=skipped,
    )
