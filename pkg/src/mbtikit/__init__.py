"""MBTI forum-post classification and generation toolkit."""

from .types import (
    AXES,
    Axis,
    InvalidTypeError,
    MbtiType,
    all_types,
    axis_letter,
    format_type,
    match_count,
    parse_type,
    type_index,
)

__all__ = [
    "AXES",
    "Axis",
    "InvalidTypeError",
    "MbtiType",
    "all_types",
    "axis_letter",
    "format_type",
    "match_count",
    "parse_type",
    "type_index",
]

__version__ = "0.1.0"
