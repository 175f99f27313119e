"""Self-describing CSV files with exact floating-point round-trips.

Comma-separated values under a single header row; '#'-prefixed lines
above the header echo the configuration that produced the file, so each
output can be regenerated from its own contents.  Reals are written
with 17 significant digits, which float() inverts bit-exactly, and all
emission is deterministic: the same rows give the same bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

KINDS = ("float", "int", "str", "bool")

_TOKEN = re.compile(r"^[^,\r\n#\"]+$")


@dataclass(frozen=True)
class CsvDocument:
    """Parsed file: echoed config lines, column names, typed rows."""

    config: tuple[str, ...]
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


def _checked_schema(schema) -> tuple[tuple[str, str], ...]:
    cols = tuple((str(name), str(kind)) for name, kind in schema)
    if not cols:
        raise ValueError("schema must name at least one column")
    for name, kind in cols:
        if kind not in KINDS:
            raise ValueError(f"unknown column kind {kind!r}")
        if not _TOKEN.match(name):
            raise ValueError(f"column name {name!r} needs quoting, "
                             "which this format does not use")
    return cols


def _format_cell(value, kind: str) -> str:
    if kind == "float":
        return format(float(value), ".17g")
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    text = str(value)
    if not _TOKEN.match(text):
        raise ValueError(f"text cell {text!r} needs quoting, "
                         "which this format does not use")
    return text


def _parse_cell(token: str, kind: str):
    try:
        if kind == "float":
            return float(token)
        if kind == "int":
            return int(token)
        if kind == "bool":
            if token == "true":
                return True
            if token == "false":
                return False
            raise ValueError
        return token
    except ValueError:
        raise ValueError(f"cell {token!r} is not a valid {kind}") from None


def emit_csv(rows: Sequence[Sequence], schema, path,
             config_lines: Sequence[str] = ()) -> None:
    """Write rows under a header, with config echoed as '#' comments."""
    cols = _checked_schema(schema)
    parts = []
    for line in config_lines:
        text = str(line)
        if "\n" in text or "\r" in text:
            raise ValueError("config lines must be single lines")
        parts.append(f"# {text}")
    parts.append(",".join(name for name, _ in cols))
    for row in rows:
        cells = tuple(row)
        if len(cells) != len(cols):
            raise ValueError(f"row {row!r} does not match the "
                             f"{len(cols)}-column schema")
        parts.append(",".join(_format_cell(cell, kind)
                              for cell, (_, kind) in zip(cells, cols)))
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8",
                          newline="\n")


def parse_csv(path, schema=None) -> CsvDocument:
    """Read a file written by emit_csv.

    With a schema the cells come back with their original types (floats
    bit-identical to what was emitted); without one, each column is
    float where every cell parses as a number and text otherwise.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    config = []
    body = []
    for line in lines:
        if line.startswith("#"):
            if body:
                raise ValueError("comment lines must precede the header")
            config.append(line[1:].strip())
        elif line:
            body.append(line)
    if not body:
        raise ValueError("missing header row")
    columns = tuple(body[0].split(","))
    raw_rows = [tuple(line.split(",")) for line in body[1:]]
    for row in raw_rows:
        if len(row) != len(columns):
            raise ValueError(f"row {row!r} does not match the header")
    if schema is not None:
        cols = _checked_schema(schema)
        if columns != tuple(name for name, _ in cols):
            raise ValueError(f"header {columns!r} does not match the "
                             "expected schema")
        rows = tuple(tuple(_parse_cell(tok, kind)
                           for tok, (_, kind) in zip(row, cols))
                     for row in raw_rows)
        return CsvDocument(tuple(config), columns, rows)
    # untyped: promote numeric columns, keep the rest as text
    promoted: list[tuple] = [list(row) for row in raw_rows]
    for j in range(len(columns)):
        try:
            values = [float(row[j]) for row in raw_rows]
        except ValueError:
            continue
        for out, v in zip(promoted, values):
            out[j] = v
    return CsvDocument(tuple(config), columns,
                       tuple(tuple(row) for row in promoted))
