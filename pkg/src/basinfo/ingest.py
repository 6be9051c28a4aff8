"""Parsing of delimited agency text files into canonical daily series.

Formats differ per agency, so every layout detail lives in a
:class:`FormatSpec`. Parsing is fail-fast: one bad row aborts the whole file
with its line number. Dates absent from the file and values matching a
missing code both become missing slots.

The same spec drives rendering (export), so a parse/render pair is an exact
round trip for values and the missing mask.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

from .errors import (
    DuplicateDate,
    EmptyInput,
    InvalidFormatSpec,
    ParseError,
)
from .model import DailySeries, GapReport, QualityFlag, Variable, day_count

# Delimiters that can never collide with dates, numbers or comment markers.
_ALLOWED_DELIMITERS = {"\t", ",", ";", "|", " "}

_DATE_TOKEN_RE = re.compile(r"YYYY|MM|DD")


@dataclass(frozen=True)
class FormatSpec:
    """Layout of a delimited text file carrying one daily series."""

    delimiter: str = "\t"
    date_format: str = "YYYY-MM-DD"
    missing_codes: tuple = ("-9999",)
    decimal_separator: str = "."
    date_column: int = 0
    value_column: int = 1
    header_lines: int = 0

    def __post_init__(self):
        if self.delimiter not in _ALLOWED_DELIMITERS:
            raise InvalidFormatSpec(f"unsupported delimiter {self.delimiter!r}")
        if self.decimal_separator not in (".", ","):
            raise InvalidFormatSpec("decimal separator must be '.' or ','")
        if self.delimiter == self.decimal_separator:
            raise InvalidFormatSpec("delimiter equals decimal separator")
        if self.date_column == self.value_column:
            raise InvalidFormatSpec("date column equals value column")
        if self.date_column < 0 or self.value_column < 0:
            raise InvalidFormatSpec("column indices must be >= 0")
        if not self.missing_codes:
            raise InvalidFormatSpec("at least one missing code required")
        if any(self.delimiter in code for code in self.missing_codes):
            raise InvalidFormatSpec("missing code contains the delimiter")
        if self.header_lines < 0:
            raise InvalidFormatSpec("header line count must be >= 0")
        tokens = _DATE_TOKEN_RE.findall(self.date_format)
        if sorted(tokens) != ["DD", "MM", "YYYY"]:
            raise InvalidFormatSpec(
                "date format must contain YYYY, MM and DD exactly once")
        if self.delimiter in _DATE_TOKEN_RE.sub("", self.date_format):
            raise InvalidFormatSpec("date format separators contain the delimiter")

    @property
    def strptime_pattern(self) -> str:
        return (self.date_format
                .replace("YYYY", "%Y")
                .replace("MM", "%m")
                .replace("DD", "%d"))

    def to_json_obj(self) -> dict:
        return {
            "delimiter": self.delimiter,
            "dateFormat": self.date_format,
            "missingCodes": list(self.missing_codes),
            "decimalSeparator": self.decimal_separator,
            "dateColumn": self.date_column,
            "valueColumn": self.value_column,
            "headerLines": self.header_lines,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FormatSpec":
        defaults = cls()
        return cls(
            delimiter=obj.get("delimiter", defaults.delimiter),
            date_format=obj.get("dateFormat", defaults.date_format),
            missing_codes=tuple(obj.get("missingCodes", defaults.missing_codes)),
            decimal_separator=obj.get("decimalSeparator", defaults.decimal_separator),
            date_column=obj.get("dateColumn", defaults.date_column),
            value_column=obj.get("valueColumn", defaults.value_column),
            header_lines=obj.get("headerLines", defaults.header_lines),
        )

    @classmethod
    def from_json(cls, raw: str) -> "FormatSpec":
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InvalidFormatSpec(f"format spec is not valid JSON: {exc}")
        if not isinstance(obj, dict):
            raise InvalidFormatSpec("format spec must be a JSON object")
        return cls.from_json_obj(obj)


def _parse_date(text: str, spec: FormatSpec) -> date:
    return datetime.strptime(text, spec.strptime_pattern).date()


def _parse_value(text: str, spec: FormatSpec) -> float:
    if spec.decimal_separator == ",":
        text = text.replace(",", ".")
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def parse_rows(raw: str, spec: FormatSpec) -> list[tuple[date, object, int]]:
    """Extract (day, value-or-None, line-number) rows from delimited text.

    Line numbers are 1-based over the original file. Header lines, blank
    lines and '#' comment lines are skipped; anything else must parse.
    """
    if raw.startswith("﻿"):
        raw = raw[1:]
    rows: list[tuple[date, object, int]] = []
    needed = max(spec.date_column, spec.value_column) + 1
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if lineno <= spec.header_lines:
            continue
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = line.split(spec.delimiter)
        if len(fields) < needed:
            raise ParseError(lineno, f"expected at least {needed} columns at line {lineno}")
        date_text = fields[spec.date_column].strip()
        value_text = fields[spec.value_column].strip()
        try:
            day = _parse_date(date_text, spec)
        except ValueError:
            raise ParseError(lineno, f"unparseable date {date_text!r} at line {lineno}")
        if value_text in spec.missing_codes:
            rows.append((day, None, lineno))
            continue
        try:
            value = _parse_value(value_text, spec)
        except ValueError:
            raise ParseError(lineno, f"unparseable value {value_text!r} at line {lineno}")
        rows.append((day, value, lineno))
    return rows


def parse_series(raw: str, spec: FormatSpec, series_id: str, station_id: str,
                 variable: Variable) -> DailySeries:
    """Parse delimited text into a version-1 series spanning the parsed dates.

    Duplicate dates with equal values collapse to one observation; a
    conflicting duplicate aborts the parse.
    """
    rows = parse_rows(raw, spec)
    if not rows:
        raise EmptyInput("no data rows in input")
    by_day: dict[int, object] = {}
    for day, value, lineno in rows:
        key = day.toordinal()
        if key in by_day and by_day[key] != value:
            raise DuplicateDate(day)
        by_day[key] = value
    first = date.fromordinal(min(by_day))
    last = date.fromordinal(max(by_day))
    n = day_count(first, last)
    base = first.toordinal()
    values = [by_day.get(base + i) for i in range(n)]
    return DailySeries(
        id=series_id,
        station_id=station_id,
        variable=variable,
        start=first,
        end=last,
        values=tuple(values),
        flags=(QualityFlag.RAW,) * n,
    )


def detect_gaps(s: DailySeries) -> GapReport:
    """Maximal runs of missing days, plus totals and available fraction."""
    gaps: list[tuple[date, date]] = []
    run_start = None
    for i, v in enumerate(s.values):
        if v is None:
            if run_start is None:
                run_start = i
        else:
            if run_start is not None:
                gaps.append((s.date_at(run_start), s.date_at(i - 1)))
                run_start = None
    if run_start is not None:
        gaps.append((s.date_at(run_start), s.date_at(len(s.values) - 1)))
    total = sum((b - a).days + 1 for a, b in gaps)
    n = len(s.values)
    fraction = 1.0 - (total / n) if n else 0.0
    return GapReport(
        series_id=s.id,
        gaps=tuple(gaps),
        total_missing=total,
        fraction_available=fraction,
    )


def render_value(v: float, spec: FormatSpec) -> str:
    """Shortest decimal text that parses back to the identical float."""
    text = repr(float(v))
    if spec.decimal_separator == ",":
        text = text.replace(".", ",")
    return text


def render_series(s: DailySeries, spec: FormatSpec,
                  header_lines: list[str] | None = None) -> str:
    """Render a series as delimited text parseable by the same spec.

    ``header_lines`` are emitted as '#' comments; the output is padded so it
    always carries at least ``spec.header_lines`` comment lines, keeping the
    spec's skip count inside the comment block.
    """
    out: list[str] = []
    comments = [h if h.startswith("#") else "# " + h
                for h in (header_lines or [])]
    while len(comments) < spec.header_lines:
        comments.append("#")
    out.extend(comments)
    width = max(spec.date_column, spec.value_column) + 1
    missing = spec.missing_codes[0]
    d = s.start
    one = timedelta(days=1)
    strftime_pattern = spec.strptime_pattern
    for v in s.values:
        fields = [""] * width
        fields[spec.date_column] = d.strftime(strftime_pattern)
        fields[spec.value_column] = missing if v is None else render_value(v, spec)
        out.append(spec.delimiter.join(fields))
        d += one
    return "\n".join(out) + "\n"
