"""Deterministic CSV and JSON writers with embedded provenance.

CSV files are RFC-4180 (comma separated, CRLF line ends, one header row).
Provenance is carried in leading ``#`` comment lines holding one compact
JSON object, so ``pandas.read_csv(path, comment="#")`` and ``read_csv``
below both skip it. JSON files carry the same object under ``"provenance"``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

SCHEMA_VERSION = "1.0"


def provenance(kind: str, **params) -> dict:
    """Parameter set, package version and schema version for one output file.

    Deliberately free of timestamps and host details so that reruns are
    byte-identical.
    """
    return {
        "schema": f"atomlaser/{kind}",
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "params": to_jsonable(params),
    }


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(to_jsonable(meta), sort_keys=True, separators=(",", ":")) + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(csv_text(header, rows, meta).encode("utf-8"))
    return path


def read_csv(path) -> tuple[dict | None, list[str], list[list[str]]]:
    """Return ``(provenance, header, rows)``; rows are left as strings."""
    meta, lines = None, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            meta = json.loads(line[1:].strip())
        else:
            lines.append(line)
    table = list(csv.reader(lines))
    return meta, table[0], table[1:]


def json_text(payload: dict) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(json_text(payload).encode("utf-8"))
    return path


def load_config(path) -> dict:
    """Read a TOML or JSON configuration file (chosen by suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with path.open("rb") as fh:
            return tomllib.load(fh)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    raise ValueError(f"config must be .toml or .json, got {path.name}")
