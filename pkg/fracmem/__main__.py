"""Main entry point for the fracmem CLI."""

import sys

from fracmem.cli import run

if __name__ == "__main__":
    sys.exit(run())
