"""Provide top level symbols."""

__version__ = "0.1.0"

from fracmem.cli import cli  # noqa: E402

__all__ = ["cli", "__version__"]
