"""Artifact repositories."""
from storage.repositories.checkpoint_repository import CheckpointRepository
from storage.repositories.dataset_repository import DatasetRepository
from storage.repositories.result_repository import ResultRepository, read_tables_file, table_rows

__all__ = ["CheckpointRepository", "DatasetRepository", "ResultRepository", "read_tables_file", "table_rows"]
