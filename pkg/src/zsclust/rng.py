"""Seeded, platform-independent random streams.

All randomness in the toolkit flows through counter-based Philox
generators keyed by SHA-256 digests of explicit string labels, so any
stream can be re-derived from (seed, labels...) alone, independent of
platform, process, or call order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, *labels: str) -> bytes:
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("utf-8"))
    for label in labels:
        h.update(b"\x1f")
        h.update(label.encode("utf-8"))
    return h.digest()


def derive_key(seed: int, *labels: str) -> int:
    """Collapse (seed, labels...) into a stable 64-bit integer."""
    return int.from_bytes(_digest(seed, *labels)[:8], "little")


def stream(seed: int, *labels: str) -> np.random.Generator:
    """Philox generator for the stream named by (seed, labels...)."""
    key = int.from_bytes(_digest(seed, *labels)[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
