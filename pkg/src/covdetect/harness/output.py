"""Result records and their CSV / JSON serialization."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

# settings that cannot change the data and are left out of the echo
_NOT_ECHOED = ("threads", "out", "format")


@dataclass
class ResultRecord:
    experiment: str
    config: dict
    version: str
    tables: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def echo(self):
        return {k: v for k, v in sorted(self.config.items()) if k not in _NOT_ECHOED}


def _plain(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def format_value(value):
    """Shortest round-trip text for floats, plain text otherwise."""
    value = _plain(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(record, name, rows):
    lines = [
        f"# covdetect {record.version}",
        f"# experiment: {record.experiment} table: {name}",
        "# config: " + json.dumps(record.echo(), sort_keys=True),
    ]
    if rows:
        cols = list(rows[0].keys())
        lines.append(",".join(cols))
        lines.extend(",".join(format_value(r[c]) for c in cols) for r in rows)
    return "\n".join(lines) + "\n"


def write_record(record, out_dir, fmt="csv"):
    """Write one file per table (CSV) or a single JSON document.

    Returns
    -------
    list of str
        Paths written, in canonical order.
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = record.experiment.replace("-", "_")
    paths = []
    if fmt == "csv":
        for name in sorted(record.tables):
            path = os.path.join(out_dir, f"{stem}_{name}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(_csv_text(record, name, record.tables[name]))
            paths.append(path)
    elif fmt == "json":
        doc = {
            "version": record.version,
            "experiment": record.experiment,
            "config": record.echo(),
            "tables": {k: [{c: _plain(v) for c, v in r.items()} for r in rows] for k, rows in sorted(record.tables.items())},
        }
        path = os.path.join(out_dir, f"{stem}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
        paths.append(path)
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    return paths


def read_csv_table(path):
    """Read a table written by :func:`write_record`; returns (comments, rows)."""
    comments, rows, header = [], [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line)
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(dict(zip(header, line.split(","))))
    return comments, rows
