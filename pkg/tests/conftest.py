import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zsclust.embank import EmbeddingBank, ManifestRecord


@pytest.fixture
def small_bank():
    """5 species x 30 rows, 4D, deterministic values."""
    rng = np.random.default_rng(12345)
    rows = []
    manifest = []
    for s in range(5):
        for i in range(30):
            rows.append(rng.normal(loc=3.0 * s, size=4))
            manifest.append(
                ManifestRecord(
                    image_id=f"img-{s:02d}-{i:03d}",
                    species=f"species_{s:02d}",
                    taxon_class="Aves" if s % 2 == 0 else "Mammalia",
                    source_code="SYN",
                    location_id=f"loc_{i % 3}",
                    validated=True,
                )
            )
    bank = EmbeddingBank(
        data=np.asarray(rows, dtype=np.float32), model_tag="test-model"
    )
    return bank, manifest
