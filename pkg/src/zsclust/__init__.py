"""Zero-shot clustering benchmark toolkit.

Takes precomputed image-embedding banks with species ground truth and
runs the full pipeline: seeded sampling, dimensionality reduction,
clustering, external validation metrics, species-level diagnostics,
and factorial benchmark sweeps, all deterministic and loggable.
"""

__version__ = "0.1.0"
