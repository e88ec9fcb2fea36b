"""
Base classes for export functionality.
"""

import json
import logging
import os
import tempfile
from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Any, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ExportFormat(str, Enum):
    """Supported export formats."""
    CSV = "csv"
    JSON = "json"
    JSONL = "jsonl"
    TEXT = "text"


def atomic_write(path: PathLike, data: bytes) -> Path:
    """
    Write ``data`` to ``path`` through a temporary file and a rename.

    Readers never observe a partially written file; the temporary file is
    removed if writing fails.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    logger.debug(f"Wrote {len(data)} bytes to {path}")
    return path


def dumps_json(obj: Any) -> bytes:
    """Deterministic pretty JSON (sorted keys, trailing newline)."""
    return (json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


class Exporter(ABC):
    """
    Abstract base class for exporters.

    Subclasses render one kind of result to bytes; ``write`` stores it
    atomically.
    """

    format: ExportFormat

    @abstractmethod
    def render(self, obj: Any) -> bytes:
        """
        Serialize ``obj``.

        Args:
            obj: The result to serialize

        Returns:
            The file contents
        """
        pass

    def write(self, obj: Any, path: PathLike) -> Path:
        """Render ``obj`` and write it atomically to ``path``."""
        return atomic_write(path, self.render(obj))


class JsonExporter(Exporter):
    """Plain JSON documents such as ``run_config.json`` and fit summaries."""

    format = ExportFormat.JSON

    def render(self, obj: Any) -> bytes:
        return dumps_json(obj)
