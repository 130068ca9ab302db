"""Dataset loading and deterministic report serialization.

CSV tables carry a header row; floats are written as ``%.17e`` so a reread
reproduces every bit.  ``manifest.json`` lists each emitted file with its
sha256, which makes reruns comparable by hash.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Unreadable or malformed input file; the message names the path."""


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: list = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "header", tuple(str(h) for h in self.header))
        rows = [tuple(r) for r in (self.rows.tolist() if isinstance(self.rows, np.ndarray) else self.rows)]
        if any(len(r) != len(self.header) for r in rows):
            raise ValueError("row width differs from header")
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return len(self.rows)


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17e" % float(v)
    return str(v)


def jsonable(obj):
    """Plain-Python copy of ``obj``; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def table_text(table):
    lines = [",".join(table.header)]
    lines += [",".join(format_cell(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _write(path, text):
    data = text.encode("utf-8")
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return {"name": path.name, "bytes": len(data), "sha256": _sha256(data)}


def emit_outputs(report, directory):
    """Write ``summary.json``, one CSV per table and ``manifest.json``; returns the manifest."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    files = [_write(out / "summary.json", dumps(report.summary_dict()))]
    for name in sorted(report.tables):
        files.append(_write(out / f"{name}.csv", table_text(report.tables[name])))
    manifest = {"command": report.command, "seed": report.seed, "files": files}
    _write(out / "manifest.json", dumps(manifest))
    return manifest


def read_table(path):
    """``(header, rows)`` of a CSV file with a header row."""
    p = Path(path)
    try:
        with p.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {p}: {exc.strerror or exc}") from exc
    if not rows:
        raise DataError(f"{p}: empty file")
    return rows[0], rows[1:]


def load_samples_csv(path):
    """Grid-sampled functions, one row per sample.

    A column named ``label`` is returned separately as integers; every other
    column is a grid value.  Returns ``(values, labels or None)``.
    """
    header, rows = read_table(path)
    if not rows:
        raise DataError(f"{path}: no samples")
    names = [h.strip().lower() for h in header]
    lab = names.index("label") if "label" in names else None
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    if lab is None:
        return data, None
    labels = data[:, lab].astype(int)
    return np.delete(data, lab, axis=1), labels


def load_json(path):
    p = Path(path)
    try:
        return json.loads(p.read_text())
    except OSError as exc:
        raise DataError(f"cannot read {p}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: invalid JSON ({exc})") from exc


def load_array(path, key="samples"):
    """Array from CSV (all columns numeric) or from ``obj[key]`` of a JSON file."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        obj = load_json(p)
        if key not in obj:
            raise DataError(f"{p}: missing field {key!r}")
        try:
            arr = np.asarray(obj[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise DataError(f"{p}: field {key!r} is not a numeric array") from exc
    else:
        arr, _ = load_samples_csv(p)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{p}: non-finite values")
    return arr
