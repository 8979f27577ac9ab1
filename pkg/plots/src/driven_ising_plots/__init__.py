"""Figure scripts for driven-ising result files."""

from .figures import FIGURE_KINDS, FigureSpec, render
from .schemas import (
    SchemaError,
    TraceTable,
    parse_fit_json,
    parse_scan_dir,
    parse_trace_csv,
    parse_trace_json,
    serialize_trace_csv,
)

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "render",
    "SchemaError",
    "TraceTable",
    "parse_fit_json",
    "parse_scan_dir",
    "parse_trace_csv",
    "parse_trace_json",
    "serialize_trace_csv",
]
