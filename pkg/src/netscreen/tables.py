"""Reading and writing of the small delimiter-separated tables used everywhere."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError

_DELIMITERS = ",;\t|"


def read_rows(path) -> list[list[str]]:
    """Return the non-empty, non-comment rows of a delimited text file.

    The delimiter is sniffed among comma, semicolon, tab and pipe. Lines
    starting with ``#`` are metadata and skipped.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", path=path) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), path=path) from None

    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("no data rows", path=path)
    try:
        dialect = csv.Sniffer().sniff(lines[0], delimiters=_DELIMITERS)
        delimiter = dialect.delimiter
    except csv.Error:
        delimiter = ","
    reader = csv.reader(lines, delimiter=delimiter)
    return [[cell.strip() for cell in row] for row in reader]


def parse_float(cell: str, path=None, line=None) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", path=path, line=line) from None


def format_number(x: float) -> str:
    """Shortest decimal string that reads back to exactly the same float."""
    x = float(x)
    if x == 0.0:
        return "0"
    return repr(x)


def format_report_number(x: float) -> str:
    """Report values use 12 significant digits."""
    return f"{float(x):.12g}"


def write_table(
    path,
    header: Sequence[str],
    rows: Iterable[Sequence],
    meta: dict[str, str] | None = None,
) -> None:
    """Write a comma-separated table, preceded by ``# key: value`` lines."""
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_meta(path) -> dict[str, str]:
    """Collect the ``# key: value`` metadata lines written by :func:`write_table`."""
    meta = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if ln.startswith("# ") and ": " in ln:
            key, value = ln[2:].split(": ", 1)
            meta[key] = value
    return meta
