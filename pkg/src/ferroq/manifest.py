"""JSON measurement manifests and geometry/material config files.

Manifest schema (``ferroq.manifest/1``)::

    {"schema": "ferroq.manifest/1",
     "records": [{"path": "v00.s2p", "bias_voltage": 0.0,
                  "sweep_direction": "forward", "temperature": 295.0,
                  "delay_length": null, "label": ""}, ...]}

A bare list of records is accepted too.  Relative paths resolve against the
manifest's directory.  Record metadata overrides whatever the Touchstone
comments say.

Model config schema (``ferroq.model/1``)::

    {"schema": "ferroq.model/1",
     "geometry": {...Geometry fields...},
     "material": {...MaterialParams fields...},
     "base_material": {...} (optional, unmodulated regions)}
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .lamb1d import Geometry, MaterialParams
from .network import Metadata, Network, NetworkError
from .touchstone import read_touchstone

__all__ = [
    "MANIFEST_SCHEMA",
    "MODEL_SCHEMA",
    "ManifestError",
    "Record",
    "load_manifest",
    "write_manifest",
    "load_record",
    "ModelConfig",
    "load_model_config",
    "write_model_config",
]

MANIFEST_SCHEMA = "ferroq.manifest/1"
MODEL_SCHEMA = "ferroq.model/1"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    path: Path
    meta: Metadata

    def to_dict(self, relative_to: Path | None = None) -> dict:
        p = self.path
        if relative_to is not None:
            try:
                p = p.relative_to(relative_to)
            except ValueError:
                pass
        d = {"path": str(p)}
        d.update({k: v for k, v in asdict(self.meta).items()})
        return d


_META_FIELDS = {f.name for f in fields(Metadata)}


def _check_schema(doc: dict, expected: str, where: str):
    schema = doc.get("schema", expected)
    if schema != expected:
        raise ManifestError(f"{where}: unsupported schema {schema!r} (expected {expected!r})")


def load_manifest(path) -> list[Record]:
    """Read a manifest; raises :class:`ManifestError` on bad structure or empty input."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict):
        _check_schema(doc, MANIFEST_SCHEMA, str(path))
        items = doc.get("records")
    else:
        items = doc
    if not isinstance(items, list):
        raise ManifestError(f"{path}: 'records' must be a list")
    if not items:
        raise ManifestError(f"{path}: manifest has no records")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "path" not in item:
            raise ManifestError(f"{path}: record {i} needs a 'path'")
        unknown = set(item) - _META_FIELDS - {"path"}
        if unknown:
            raise ManifestError(f"{path}: record {i} has unknown keys {sorted(unknown)}")
        kw = {k: item[k] for k in _META_FIELDS if item.get(k) is not None}
        try:
            meta = Metadata(**kw)
        except (NetworkError, TypeError) as exc:
            raise ManifestError(f"{path}: record {i}: {exc}") from None
        p = Path(item["path"])
        out.append(Record(p if p.is_absolute() else path.parent / p, meta))
    return out


def write_manifest(records: list[Record], path) -> None:
    path = Path(path)
    doc = {"schema": MANIFEST_SCHEMA, "records": [r.to_dict(path.parent) for r in records]}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_record(rec: Record) -> Network:
    """Read the record's Touchstone file and attach the manifest metadata."""
    net = read_touchstone(rec.path)
    m = rec.meta
    changes = {k: getattr(m, k) for k in _META_FIELDS if getattr(m, k) not in (None, "")}
    return net.with_meta(**changes) if changes else net


@dataclass(frozen=True)
class ModelConfig:
    geometry: Geometry
    material: MaterialParams
    base_material: MaterialParams | None = None

    def to_dict(self) -> dict:
        d = {"schema": MODEL_SCHEMA, "geometry": asdict(self.geometry), "material": asdict(self.material)}
        if self.base_material is not None:
            d["base_material"] = asdict(self.base_material)
        return d


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ManifestError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from None


def model_config_from_dict(doc: dict) -> ModelConfig:
    _check_schema(doc, MODEL_SCHEMA, "model config")
    if "material" not in doc:
        raise ManifestError("model config needs a 'material' object")
    geom = _build(Geometry, doc.get("geometry", {}), "geometry")
    mat = _build(MaterialParams, doc["material"], "material")
    base = _build(MaterialParams, doc["base_material"], "base_material") if doc.get("base_material") else None
    return ModelConfig(geom, mat, base)


def load_model_config(path) -> ModelConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    return model_config_from_dict(doc)


def write_model_config(cfg: ModelConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
