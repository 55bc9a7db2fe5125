"""Append-only CSV sink for transfer records.

Rows are appended as jobs finish so a killed sweep loses at most the row in
flight; on completion the file is rewritten in manifest order, which makes a
resumed run byte-identical to an uninterrupted one. Floats are serialized
with repr-roundtrip precision, so load(write(x)) == x exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

from ..statfit import TransferRecord

RECORD_FIELDS = [
    "source",
    "target",
    "method",
    "accuracy",
    "leep",
    "logme",
    "n_train",
    "n_test",
    "seed",
    "status",
    "error",
]

_FLOAT_FIELDS = ("accuracy", "leep", "logme")
_INT_FIELDS = ("n_train", "n_test", "seed")


def job_key(row_or_method, source=None, target=None) -> str:
    """Stable identity of a job: "METHOD:source->target"."""
    if isinstance(row_or_method, dict):
        row = row_or_method
        return f"{row['method']}:{row['source']}->{row['target']}"
    return f"{row_or_method}:{source}->{target}"


def _encode(row: dict) -> dict:
    out = {}
    for field in RECORD_FIELDS:
        value = row.get(field, "")
        out[field] = "" if value is None else str(value)
    return out


def _decode(raw: dict) -> dict:
    row = dict(raw)
    for field in _FLOAT_FIELDS:
        row[field] = float(row[field]) if row[field] != "" else None
    for field in _INT_FIELDS:
        row[field] = int(row[field]) if row[field] != "" else None
    return row


def append_record(path, row: dict):
    """Append one row, creating the file (with header) if needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        if new:
            writer.writeheader()
        writer.writerow(_encode(row))
        fh.flush()


def load_records(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and list(reader.fieldnames) != RECORD_FIELDS:
            raise ValueError(
                f"{path.name}: unexpected columns {reader.fieldnames}"
            )
        return [_decode(raw) for raw in reader]


def canonicalize_records(path, ordered_keys):
    """Rewrite the file with rows in the given job-key order.

    Unknown keys are an error; missing keys are simply absent (partial run).
    """
    rows = {job_key(r): r for r in load_records(path)}
    unknown = set(rows) - set(ordered_keys)
    if unknown:
        raise ValueError(f"records not in manifest: {sorted(unknown)}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for key in ordered_keys:
            if key in rows:
                writer.writerow(_encode(rows[key]))


def to_transfer_records(rows) -> list:
    """Successful rows as statfit TransferRecords (failed rows dropped)."""
    out = []
    for row in rows:
        if row.get("status") != "ok":
            continue
        out.append(
            TransferRecord(
                source=row["source"],
                target=row["target"],
                method=row["method"],
                accuracy=row["accuracy"],
                leep=row["leep"],
                logme=row["logme"],
            )
        )
    return out
