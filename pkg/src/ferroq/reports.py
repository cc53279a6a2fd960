"""JSON and CSV report writing.

Every JSON report is an object with ``schema`` (``ferroq.<kind>/<n>``),
``version`` (toolkit version), ``config`` (the fully resolved settings of the
run) and a payload.  Non-finite floats are written as ``null``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__

__all__ = ["SCHEMA_VERSIONS", "to_jsonable", "make_report", "write_json", "read_report", "write_csv"]

SCHEMA_VERSIONS = {
    "fit": 1,
    "extract": 1,
    "sweep": 1,
    "adl": 1,
    "simulate": 1,
    "synth": 1,
}


def to_jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return {"re": to_jsonable(x.real), "im": to_jsonable(x.imag)}
    if isinstance(x, Path):
        return str(x)
    return x


def make_report(kind: str, config: dict, **payload) -> dict:
    return {"schema": f"ferroq.{kind}/{SCHEMA_VERSIONS[kind]}", "version": __version__,
            "config": to_jsonable(config), **to_jsonable(payload)}


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(report), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_report(path, kind: str) -> dict:
    """Load a report and check its schema kind and version."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    want = f"ferroq.{kind}/{SCHEMA_VERSIONS[kind]}"
    if not isinstance(doc, dict) or doc.get("schema") != want:
        got = doc.get("schema") if isinstance(doc, dict) else type(doc).__name__
        raise ValueError(f"{path}: expected a {want} report, got {got!r}")
    return doc


def write_csv(path, rows: Iterable[dict], columns: Sequence[str] | None = None) -> Path:
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in to_jsonable(r).items()})
    return path
