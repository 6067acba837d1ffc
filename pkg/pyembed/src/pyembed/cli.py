"""Batch extraction entry point.

    pyembed extract --model patchproj-768 --input crops/ \
        --labels labels.csv --out bankdir/
    pyembed verify bankdir/
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionJob, extract
from .verify import verify_format


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pyembed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed image crops into a bank")
    p.add_argument("--model", required=True,
                   help="checkpoint id (see encoders) or patchproj-<dim>")
    p.add_argument("--input", required=True, help="directory of image crops")
    p.add_argument("--labels", required=True, help="label CSV")
    p.add_argument("--out", required=True, help="output bank directory")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--expected-dim", type=int)

    p = sub.add_parser("verify", help="re-check a bank with the minimal parser")
    p.add_argument("bank", help="bank directory")

    args = parser.parse_args(argv)
    if args.command == "extract":
        try:
            result = extract(
                ExtractionJob(
                    model_id=args.model,
                    input_dir=args.input,
                    labels_csv=args.labels,
                    output_dir=args.out,
                    batch_size=args.batch_size,
                    device=args.device,
                    expected_dim=args.expected_dim,
                )
            )
        except (ValueError, RuntimeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(
            f"{result.n_rows} rows x {result.dim} dims -> {result.output_dir}"
            + (f" ({len(result.skipped)} skipped)" if result.skipped else "")
        )
        return 0
    ok = verify_format(args.bank)
    print("ok" if ok else "invalid")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
