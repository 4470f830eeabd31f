"""CSV output for sweep rows."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .runner import COLUMNS, ResultRow


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".10g")
    return str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(COLUMNS)
    for row in rows:
        data = row.as_dict() if isinstance(row, ResultRow) else row
        writer.writerow([format_value(data.get(c)) for c in COLUMNS])
    return buf.getvalue()


def write_results(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    return path


def read_results(path) -> list[dict]:
    """Read a results CSV back; empty fields become ``None``, numbers become floats."""
    with open(path, encoding="utf-8", newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            row = {}
            for key, text in rec.items():
                if text == "":
                    row[key] = None
                elif text in ("true", "false"):
                    row[key] = text == "true"
                else:
                    try:
                        row[key] = float(text)
                    except ValueError:
                        row[key] = text
            out.append(row)
        return out
