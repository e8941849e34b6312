"""
Repository for model checkpoints.

A checkpoint is one file: a JSON header line (format tag, config, embedding
table, graph, parameter shapes) followed by a ``numpy.savez`` payload holding
every parameter tensor as float64.
"""
import io
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from engine.errors import InputError, ParseError
from storage.models import CHECKPOINT_FORMAT, CheckpointHeader

logger = logging.getLogger(__name__)


class CheckpointRepository:
    """Reads and writes checkpoint files under a directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path_for(self, name: str) -> Path:
        return self.root / f"{name}.ckpt"

    def save(self, name: str, header: CheckpointHeader, arrays: Dict[str, np.ndarray]) -> Path:
        """
        Write a checkpoint.

        Args:
            name: File stem
            header: Checkpoint header; ``shapes`` must describe ``arrays``
            arrays: Parameter name -> array

        Returns:
            Path of the written file
        """
        if set(header.shapes) != set(arrays):
            raise InputError("checkpoint header shapes do not match the parameter arrays")
        for key, array in arrays.items():
            if list(np.shape(array)) != header.shapes[key]:
                raise InputError(f"shape of '{key}' differs from the header")

        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        payload = io.BytesIO()
        np.savez(payload, **{k: np.asarray(v, dtype=np.float64) for k, v in sorted(arrays.items())})
        with path.open("wb") as fh:
            fh.write(header.model_dump_json().encode("utf-8"))
            fh.write(b"\n")
            fh.write(payload.getvalue())
        logger.info(f"Saved checkpoint {path} ({len(arrays)} tensors)")
        return path

    @staticmethod
    def load_file(path: Union[str, Path]) -> Tuple[CheckpointHeader, Dict[str, np.ndarray]]:
        """Read a checkpoint file; the format tag must be 'grda-ckpt-v1'."""
        path = Path(path)
        if not path.exists():
            raise InputError(f"checkpoint not found: {path}")
        raw = path.read_bytes()
        newline = raw.find(b"\n")
        if newline < 0:
            raise ParseError(f"{path} has no checkpoint header", line=1)
        try:
            header = CheckpointHeader.model_validate_json(raw[:newline])
        except ValidationError as e:
            raise ParseError(f"{path} header is not a {CHECKPOINT_FORMAT} header: {e.errors()[0]['msg']}", line=1) from None
        with np.load(io.BytesIO(raw[newline + 1:]), allow_pickle=False) as payload:
            arrays = {key: payload[key] for key in payload.files}
        if set(arrays) != set(header.shapes):
            raise ParseError(f"{path} payload does not match header shapes")
        return header, arrays

    def load(self, name: str) -> Tuple[CheckpointHeader, Dict[str, np.ndarray]]:
        return self.load_file(self.path_for(name))
