"""Small CSV helpers shared by the file interfaces.

Floats are written with shortest round-trip formatting so that a file read
back reproduces the exact binary values and identical runs produce
byte-identical files.
"""

from __future__ import annotations

from .errors import ParseError


def fmt(x) -> str:
    return repr(float(x))


def read_table(path: str, header: str) -> list[tuple[int, list[str]]]:
    """Read a CSV with a fixed header; returns (line_number, fields) rows.

    Raises ParseError with file and line context on a wrong header or on a
    row whose field count does not match the header.
    """
    ncols = len(header.split(","))
    rows: list[tuple[int, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if first.strip() != header:
            raise ParseError(f"expected header {header!r}", path, 1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.strip().split(",")
            if len(fields) != ncols:
                raise ParseError(
                    f"expected {ncols} fields, got {len(fields)}", path, lineno
                )
            rows.append((lineno, fields))
    return rows


def parse_float(text: str, path: str, lineno: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad value for {column}: {text!r}", path, lineno) from None


def parse_int(text: str, path: str, lineno: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad value for {column}: {text!r}", path, lineno) from None
