import csv
import json
import shutil
import subprocess

import numpy as np
import pytest
from PIL import Image

from pyembed import ExtractionJob, extract, verify_format


def _make_crops(tmp_path, n=20, broken=()):
    crops = tmp_path / "crops"
    crops.mkdir()
    rng = np.random.default_rng(0)
    rows = []
    for i in range(n):
        name = f"crop_{i:03d}.png"
        if i in broken:
            (crops / name).write_bytes(b"not an image")
        else:
            arr = rng.integers(0, 255, size=(48 + i, 64, 3), dtype=np.uint8)
            Image.fromarray(arr).save(crops / name)
        rows.append(
            {
                "image_path": name,
                "image_id": f"img-{i:03d}",
                "species": f"species_{i % 4}",
                "taxon_class": "Mammalia" if i % 2 else "Aves",
                "source_code": "SYN",
                "location_id": f"loc_{i % 3}" if i % 5 else "",
                "validated": "true" if i % 7 else "false",
            }
        )
    return crops, rows


def _write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _job(tmp_path, crops, out="bank", model="patchproj-768", **kw):
    return ExtractionJob(
        model_id=model,
        input_dir=str(crops),
        labels_csv=str(tmp_path / "labels.csv"),
        output_dir=str(tmp_path / out),
        **kw,
    )


def test_extract_20_crops_768(tmp_path):
    crops, rows = _make_crops(tmp_path)
    _write_csv(tmp_path / "labels.csv", rows)
    result = extract(_job(tmp_path, crops))
    assert result.n_rows == 20
    assert result.dim == 768
    assert verify_format(result.output_dir)
    sidecar = json.loads((tmp_path / "bank" / "extraction.json").read_text())
    assert sidecar["dim"] == 768
    assert "resize" in sidecar["preprocessing"]


def test_reextraction_byte_identical(tmp_path):
    crops, rows = _make_crops(tmp_path)
    _write_csv(tmp_path / "labels.csv", rows)
    a = extract(_job(tmp_path, crops, out="bank_a"))
    b = extract(_job(tmp_path, crops, out="bank_b"))
    for name in ("embeddings.zseb", "manifest.jsonl"):
        assert (tmp_path / "bank_a" / name).read_bytes() == (
            tmp_path / "bank_b" / name
        ).read_bytes()
    assert a.n_rows == b.n_rows


def test_row_order_is_sorted_image_id(tmp_path):
    crops, rows = _make_crops(tmp_path, n=10)
    _write_csv(tmp_path / "labels.csv", rows)
    extract(_job(tmp_path, crops, out="bank_fwd"))
    # Shuffle the CSV rows: output must not change a byte.
    _write_csv(tmp_path / "labels.csv", rows[::-1])
    extract(_job(tmp_path, crops, out="bank_rev"))
    for name in ("embeddings.zseb", "manifest.jsonl"):
        assert (tmp_path / "bank_fwd" / name).read_bytes() == (
            tmp_path / "bank_rev" / name
        ).read_bytes()
    ids = [
        json.loads(line)["image_id"]
        for line in (tmp_path / "bank_fwd" / "manifest.jsonl").read_text().splitlines()
    ]
    assert ids == sorted(ids)


def test_undecodable_images_skipped_and_reported(tmp_path):
    crops, rows = _make_crops(tmp_path, n=12, broken={3, 8})
    _write_csv(tmp_path / "labels.csv", rows)
    result = extract(_job(tmp_path, crops))
    assert result.n_rows == 10
    assert {s["image_id"] for s in result.skipped} == {"img-003", "img-008"}
    sidecar = json.loads((tmp_path / "bank" / "extraction.json").read_text())
    assert len(sidecar["skipped"]) == 2
    assert verify_format(result.output_dir)


def test_duplicate_image_id_is_error(tmp_path):
    crops, rows = _make_crops(tmp_path, n=6)
    rows[3]["image_id"] = rows[0]["image_id"]
    _write_csv(tmp_path / "labels.csv", rows)
    with pytest.raises(ValueError, match="duplicate"):
        extract(_job(tmp_path, crops))


def test_dim_mismatch_is_hard_error(tmp_path):
    crops, rows = _make_crops(tmp_path, n=4)
    _write_csv(tmp_path / "labels.csv", rows)
    with pytest.raises(ValueError, match="wide"):
        extract(_job(tmp_path, crops, expected_dim=1280))


def test_other_widths_supported(tmp_path):
    crops, rows = _make_crops(tmp_path, n=4)
    _write_csv(tmp_path / "labels.csv", rows)
    result = extract(_job(tmp_path, crops, model="patchproj-1280"))
    assert result.dim == 1280
    assert verify_format(result.output_dir)


def test_unknown_model_rejected(tmp_path):
    crops, rows = _make_crops(tmp_path, n=2)
    _write_csv(tmp_path / "labels.csv", rows)
    with pytest.raises(ValueError, match="unknown model"):
        extract(_job(tmp_path, crops, model="mystery-net"))


def test_primary_toolkit_accepts_bank(tmp_path):
    """The bank must validate through the primary component's CLI,
    consumed purely as an external interface."""
    cli = shutil.which("zsclust")
    if cli is None:
        pytest.skip("primary toolkit CLI not installed")
    crops, rows = _make_crops(tmp_path)
    _write_csv(tmp_path / "labels.csv", rows)
    result = extract(_job(tmp_path, crops))
    proc = subprocess.run(
        [cli, "validate", result.output_dir], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["ok"]
    assert summary["dim"] == 768
    assert summary["n_rows"] == 20
