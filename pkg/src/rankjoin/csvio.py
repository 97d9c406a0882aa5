"""Numeric CSV files: a header row, comma separated, no quoting."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError
from .model import Relation


def format_value(v: float) -> str:
    """Integral floats print without a fractional part; everything else uses ``repr``."""
    v = float(v)
    if math.isfinite(v) and v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(v)


def load_relation(name: str, path: str | Path, weight_column: str | None = None,
                  weight_constant: float | None = None) -> Relation:
    """Load ``path`` as relation ``name``.

    The weight comes from ``weight_column`` (which is then not an attribute)
    or is ``weight_constant`` for every row; with neither, weights are zero.
    """
    if weight_column is not None and weight_constant is not None:
        raise SchemaError(f"{name}: give a weight column or a constant, not both")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        if weight_column is not None and weight_column not in header:
            raise SchemaError(f"{path}: no weight column {weight_column!r}")
        wpos = header.index(weight_column) if weight_column is not None else None
        attrs = [h for i, h in enumerate(header) if i != wpos]
        rows, weights = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-numeric field") from None
            if wpos is not None:
                weights.append(vals.pop(wpos))
            rows.append(vals)
    if wpos is None:
        weights = [float(weight_constant or 0.0)] * len(rows)
    return Relation(name, attrs, rows, weights)


def write_relation(rel: Relation, path: str | Path, weight_column: str | None = "weight") -> None:
    """Write ``rel`` so that :func:`load_relation` with the same weight column reads it back."""
    if weight_column is not None and weight_column in rel.attributes:
        raise SchemaError(f"weight column {weight_column!r} clashes with an attribute of {rel.name}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(rel.attributes) + ([weight_column] if weight_column else [])
        w.writerow(header)
        for row, weight in zip(rel.rows, rel.weights):
            vals = [format_value(v) for v in row]
            if weight_column:
                vals.append(format_value(weight))
            w.writerow(vals)


def write_rows(fh, header: Sequence[str], rows: Iterable[Sequence[float]], flush_every: int = 1024) -> int:
    """Stream numeric rows to an open text file, flushing every ``flush_every`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    count = 0
    for row in rows:
        w.writerow([format_value(v) for v in row])
        count += 1
        if count % flush_every == 0:
            fh.flush()
    fh.flush()
    return count
