"""Run artifacts: a schema-versioned JSONL event stream plus per-day CSV
aggregates.

Events serialize with sorted keys and native scalar types so identical
runs produce byte-identical files. File writes stream to a sibling
``.part`` file and rename into place on close, so a crashed run never
leaves a truncated artifact behind.
"""

import csv
import json
import os
from pathlib import Path

import numpy as np

SCHEMA_ID = "dctsim-trace-v1"


def to_native(value):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [to_native(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: to_native(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_native(v) for v in value]
    return value


def dumps_record(record):
    """Canonical one-line JSON for a trace record."""
    return json.dumps(to_native(record), sort_keys=True,
                      separators=(",", ":"))


class TraceWriter:
    """Append-only event log, kept in memory and/or streamed to JSONL.

    The first line is a header record carrying the schema id and any
    run-level fields (config snapshot, seed).
    """

    def __init__(self, path=None, header=None, keep_events=True):
        self.header = {"schema": SCHEMA_ID}
        if header:
            self.header.update(to_native(header))
        self.records = [] if keep_events else None
        self._path = Path(path) if path is not None else None
        self._tmp = None
        self._fh = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._tmp = self._path.with_name(self._path.name + ".part")
            self._fh = open(self._tmp, "w")
            self._fh.write(dumps_record(self.header) + "\n")

    def event(self, kind, day, **fields):
        rec = {"event": kind, "day": day}
        rec.update(fields)
        rec = to_native(rec)
        if self.records is not None:
            self.records.append(rec)
        if self._fh is not None:
            self._fh.write(dumps_record(rec) + "\n")

    def close(self):
        if self._fh is not None:
            self._fh.close()
            os.replace(self._tmp, self._path)
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def serialize(self):
        """Full trace as the exact bytes the JSONL file would contain."""
        lines = [dumps_record(self.header)]
        lines.extend(dumps_record(r) for r in self.records or [])
        return ("\n".join(lines) + "\n").encode()


def read_trace(path):
    """Load a JSONL trace; returns (header, events)."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("schema") != SCHEMA_ID:
        raise ValueError(f"{path} is not a {SCHEMA_ID} trace")
    return lines[0], lines[1:]


def write_daily_csv(path, rows):
    """Per-day aggregates as CSV (atomic). rows: list of dicts sharing a
    key set; column order follows the first row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    if rows:
        fields = list(rows[0])
        with open(tmp, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: to_native(v) for k, v in row.items()})
    else:
        open(tmp, "w").close()
    os.replace(tmp, path)
    return path
