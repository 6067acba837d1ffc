"""Writer for the zseb bank interchange format.

Layout (little-endian): magic ``ZSEB``, version u16 = 1, dtype u8 = 0
(f32), reserved u8 = 0, n_rows u64, dim u32, then n_rows*dim f32
values row-major. The manifest is UTF-8 JSON lines with keys
image_id, species, taxon_class, source_code, location_id (nullable),
validated (bool), one object per matrix row in the same order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ZSEB"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sHBBQI")

EMBEDDINGS_FILE = "embeddings.zseb"
MANIFEST_FILE = "manifest.jsonl"

MANIFEST_KEYS = (
    "image_id",
    "species",
    "taxon_class",
    "source_code",
    "location_id",
    "validated",
)


def write_bank_dir(out_dir: str | Path, matrix: np.ndarray, rows: list[dict]) -> None:
    """Write embeddings.zseb + manifest.jsonl; rows align with matrix rows."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-dimensional")
    if len(rows) != matrix.shape[0]:
        raise ValueError("manifest rows must match matrix rows")
    if not np.isfinite(matrix).all():
        raise ValueError("matrix contains non-finite values")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = HEADER.pack(MAGIC, VERSION, DTYPE_F32, 0, matrix.shape[0], matrix.shape[1])
    with open(out / EMBEDDINGS_FILE, "wb") as fh:
        fh.write(header)
        fh.write(matrix.tobytes())
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        for row in rows:
            obj = {k: row.get(k) for k in MANIFEST_KEYS}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
