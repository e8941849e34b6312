"""Pydantic records and file repositories for datasets, checkpoints and results."""
