"""Deterministic report emission: schema-versioned JSON, CSV tables and BCH4 snapshots.

Floats are written with 17 significant digits so that identical runs give
byte-identical files; non-finite values become JSON ``null`` and CSV ``nan``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .grid import Field, save_snapshot

__all__ = [
    "SCHEMA_VERSION",
    "fmt_float",
    "to_jsonable",
    "dumps",
    "load_schema",
    "report_envelope",
    "write_json",
    "write_csv",
    "write_snapshot",
]

SCHEMA_VERSION = "1.0"


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_jsonable(obj):
    """Plain Python structure with numpy scalars/arrays and dataclasses unpacked."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    return repr(obj)


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if not obj:
        return "[]"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
    items = [pad + _encode(v, indent, level + 1) for v in obj]
    return "[\n" + ",\n".join(items) + "\n" + end + "]"


def dumps(obj, indent: int = 2) -> str:
    """JSON text with fixed 17-digit floats and insertion-ordered keys."""
    return _encode(to_jsonable(obj), indent, 0) + "\n"


def load_schema() -> dict:
    text = resources.files("bichoquard").joinpath("schema/report.schema.json").read_text()
    return json.loads(text)


def report_envelope(command: str, config: dict, results, *, provenance=None, status="ok") -> dict:
    from . import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "command": command,
        "status": status,
        "config": dict(config),
        "provenance": dict(provenance or {}),
        "results": results,
    }


def _target(outdir, name) -> Path:
    path = Path(outdir) / name
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path.parent}: {exc}") from exc
    return path


def write_json(obj, outdir, name="report.json") -> Path:
    path = _target(outdir, name)
    try:
        path.write_text(dumps(obj))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if v is None:
        return ""
    return str(v)


def write_csv(rows, outdir, name, columns=None, *, header: dict | None = None) -> Path:
    """CSV with ``# key=value`` provenance lines, then a header row and the data."""
    rows = list(rows)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}={_cell(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    path = _target(outdir, name)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_snapshot(u: Field, outdir, name="state.bch4") -> Path:
    path = _target(outdir, name)
    try:
        return save_snapshot(u, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
