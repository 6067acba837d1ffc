"""Embedding extraction from cropped animal images into zseb banks."""

from .extract import ExtractionJob, ExtractionResult, extract
from .verify import verify_format

__all__ = ["ExtractionJob", "ExtractionResult", "extract", "verify_format"]
__version__ = "0.1.0"
