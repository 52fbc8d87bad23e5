"""CSV output with a config comment line.

Layout: a first line ``# {json}`` holding the full run configuration
(sorted keys), a header row, then data rows. Comma separated, LF line
endings, floats at 17 significant digits, integers and strings as is.
"""

import csv
import io
import json
import math


def format_value(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


def config_comment(config: dict) -> str:
    return "# " + json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))


def csv_text(columns, rows, config=None) -> str:
    """``rows`` are dicts keyed by column name or sequences in column order."""
    buf = io.StringIO()
    if config is not None:
        buf.write(config_comment(config) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        values = [row[c] for c in columns] if isinstance(row, dict) else list(row)
        writer.writerow([format_value(v) for v in values])
    return buf.getvalue()


def write_csv(path, columns, rows, config=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(columns, rows, config))


def read_csv(path):
    """Returns ``(config or None, columns, rows)`` with rows as lists of strings."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    config = None
    body = []
    for line in lines:
        if line.startswith("#"):
            if config is None and not body:
                try:
                    config = json.loads(line[1:].strip())
                except ValueError:
                    config = None
            continue
        body.append(line)
    records = [r for r in csv.reader(body) if r]
    if not records:
        return config, [], []
    return config, records[0], records[1:]
