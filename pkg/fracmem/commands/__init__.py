"""Command implementations for the fracmem CLI."""
