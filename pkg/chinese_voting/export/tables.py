"""
CSV export of report tables.
"""

import logging

import pandas as pd

from chinese_voting.core.trajectory import Dataset, serialize_event_log, serialize_metadata
from chinese_voting.export.base import ExportFormat, Exporter

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


class TableExporter(Exporter):
    """
    Writes DataFrames as CSV with a fixed float format and ``\\n`` line ends,
    so identical results give identical bytes.
    """

    format = ExportFormat.CSV

    def __init__(self, float_format: str = FLOAT_FORMAT):
        self.float_format = float_format

    def render(self, obj: pd.DataFrame) -> bytes:
        text = obj.to_csv(index=False, float_format=self.float_format, lineterminator="\n")
        return text.encode("utf-8")


class EventLogExporter(Exporter):
    """Writes a dataset (or its metadata sidecar) as JSON lines."""

    format = ExportFormat.JSONL

    def __init__(self, metadata: bool = False):
        self.metadata = metadata

    def render(self, obj: Dataset) -> bytes:
        return serialize_metadata(obj) if self.metadata else serialize_event_log(obj)
