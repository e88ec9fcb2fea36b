"""
Writers for parameter files, report tables and event logs.
"""

from chinese_voting.export.base import (
    ExportFormat,
    Exporter,
    JsonExporter,
    atomic_write,
    dumps_json,
)
from chinese_voting.export.params import ParamsExporter, ParamsFile, format_float, parse_params
from chinese_voting.export.tables import EventLogExporter, TableExporter

__all__ = [
    "ExportFormat",
    "Exporter",
    "JsonExporter",
    "atomic_write",
    "dumps_json",
    "ParamsExporter",
    "ParamsFile",
    "format_float",
    "parse_params",
    "EventLogExporter",
    "TableExporter",
]
