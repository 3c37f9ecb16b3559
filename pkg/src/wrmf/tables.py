"""Deterministic CSV/JSON emission of column tables.

A table is an ordered mapping ``column name -> list of cells``.  Floats are
written with 17 significant digits, which round-trips every double exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path

_INT_RE = re.compile(r"^[+-]?\d+$")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if hasattr(v, "item"):  # numpy scalar
        return _cell(v.item())
    return str(v)


def _json_value(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def check_table(table: dict) -> int:
    lengths = {len(col) for col in table.values()}
    if len(lengths) > 1:
        raise ValueError(f"ragged table: column lengths {sorted(lengths)}")
    return lengths.pop() if lengths else 0


def to_csv(table: dict) -> str:
    nrows = check_table(table)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = list(table)
    writer.writerow(cols)
    for i in range(nrows):
        writer.writerow([_cell(table[c][i]) for c in cols])
    return buf.getvalue()


def parse_cell(s: str):
    if s == "":
        return None
    if s == "true":
        return True
    if s == "false":
        return False
    if _INT_RE.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def from_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    return {name: [parse_cell(r[j]) for r in body] for j, name in enumerate(header)}


def to_json(tables: dict, meta: dict | None = None) -> str:
    doc = {}
    if meta is not None:
        doc["meta"] = meta
    for name, table in tables.items():
        check_table(table)
        doc[name] = {col: [_json_value(v) for v in vals] for col, vals in table.items()}
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def sidecar_path(path: Path, name: str) -> Path:
    """Path for a secondary table next to the main CSV output."""
    return path.with_name(f"{path.stem}.{name}{path.suffix or '.csv'}")


def write_tables(tables: dict, path: str | Path | None, fmt: str, meta: dict | None, stream=None) -> list[Path]:
    """Write ``tables`` (first entry is the main table).

    CSV: the main table goes to ``path``, others to ``<stem>.<name>.csv``.
    With no path everything is printed to ``stream``, tables separated by
    a ``# <name>`` line.  JSON: a single document holding every table.
    """
    written = []
    if fmt == "json":
        text = to_json(tables, meta)
        if path is None:
            stream.write(text)
        else:
            Path(path).write_text(text, newline="\n")
            written.append(Path(path))
        return written
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    names = list(tables)
    if path is None:
        for k, name in enumerate(names):
            if k:
                stream.write("\n")
            stream.write(f"# {name}\n")
            stream.write(to_csv(tables[name]))
        return written
    path = Path(path)
    for k, name in enumerate(names):
        target = path if k == 0 else sidecar_path(path, name)
        target.write_text(to_csv(tables[name]), newline="\n")
        written.append(target)
    return written
