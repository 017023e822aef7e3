"""Embedding-store extraction with pre-trained classification networks."""

from .architectures import ARCHITECTURES, ArchSpec, get_arch, load_model
from .pipeline import ExtractorConfig, extract, list_images

__all__ = [
    "ARCHITECTURES",
    "ArchSpec",
    "ExtractorConfig",
    "extract",
    "get_arch",
    "list_images",
    "load_model",
]
