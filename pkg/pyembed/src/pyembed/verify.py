"""Independent minimal re-parser of the zseb bank layout.

Deliberately separate from the writer: it re-reads bytes with its own
struct unpacking and checks header fields, declared sizes against the
real file size, value finiteness, and manifest alignment. Returns a
boolean, never raises.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

_HEADER_FMT = "<4sHBBQI"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


def verify_format(bank_dir: str | Path) -> bool:
    try:
        d = Path(bank_dir)
        emb = d / "embeddings.zseb"
        man = d / "manifest.jsonl"
        if not emb.is_file() or not man.is_file():
            return False
        size = os.path.getsize(emb)
        if size < _HEADER_SIZE:
            return False
        with open(emb, "rb") as fh:
            magic, version, dtype, reserved, n_rows, dim = struct.unpack(
                _HEADER_FMT, fh.read(_HEADER_SIZE)
            )
            if magic != b"ZSEB" or version != 1 or dtype != 0 or reserved != 0:
                return False
            if n_rows < 1 or dim < 1:
                return False
            if size != _HEADER_SIZE + n_rows * dim * 4:
                return False
            values = np.frombuffer(fh.read(), dtype="<f4")
        if values.shape[0] != n_rows * dim:
            return False
        if not np.isfinite(values).all():
            return False

        n_lines = 0
        seen = set()
        with open(man, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if not obj.get("image_id") or not obj.get("species"):
                    return False
                if obj["image_id"] in seen:
                    return False
                seen.add(obj["image_id"])
                n_lines += 1
        return n_lines == n_rows
    except Exception:
        return False
