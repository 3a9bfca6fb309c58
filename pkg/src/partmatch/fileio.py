"""On-disk formats shared by the CLI, service, and fixtures.

All JSON is written canonically (sorted keys, compact separators) so golden
files and log checksums are stable. Large arrays in shape files may live in a
sibling little-endian float64 blob referenced by name.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

Array = np.ndarray


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# --- checksummed JSON-lines records ---------------------------------------


def record_to_line(record: dict) -> str:
    """Serialize a record with a trailing crc32 over the canonical payload bytes."""
    if "crc32" in record:
        raise ValueError("record already carries a crc32 field")
    payload = canonical_json(record)
    crc = zlib.crc32(payload.encode("utf-8"))
    return canonical_json({**record, "crc32": crc})


def line_to_record(line: str, index: int | None = None) -> dict:
    """Parse and verify a checksummed record line."""
    where = f" at record {index}" if index is not None else ""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON{where}: {exc}") from exc
    if "crc32" not in obj:
        raise ValueError(f"missing crc32{where}")
    crc = obj.pop("crc32")
    expected = zlib.crc32(canonical_json(obj).encode("utf-8"))
    if crc != expected:
        raise ValueError(f"checksum mismatch{where}")
    return obj


def read_log(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if line:
                records.append(line_to_record(line, index=i))
    return records


# --- shape fixture files ---------------------------------------------------


def _load_array(value, base_dir: Path, dtype=np.float64) -> Array:
    if isinstance(value, dict):
        name = value.get("external")
        shape = value.get("shape")
        byte_order = value.get("byte_order", "little")
        if name is None or shape is None:
            raise ValueError("external array reference needs 'external' and 'shape'")
        if byte_order != "little":
            raise ValueError(f"unsupported byte order {byte_order!r}")
        raw = (base_dir / name).read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").reshape(shape)
        return np.asarray(arr, dtype=dtype)
    return np.asarray(value, dtype=dtype)


def load_shape(path: str | Path) -> dict:
    """Load a shape fixture: id, points, optional features and ground-truth parts."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "id" not in doc or "points" not in doc:
        raise ValueError(f"shape file {path} needs 'id' and 'points'")
    out = {"id": doc["id"], "points": _load_array(doc["points"], path.parent)}
    if out["points"].ndim != 2 or out["points"].shape[1] != 3:
        raise ValueError("points must be N x 3")
    for key in ("geo_features", "app_features"):
        if key in doc:
            out[key] = _load_array(doc[key], path.parent)
            if out[key].shape[0] != out["points"].shape[0]:
                raise ValueError(f"{key} row count does not match points")
    if "gt_parts" in doc:
        parts = []
        for p in doc["gt_parts"]:
            parts.append({"label": p["label"], "point_indices": [int(i) for i in p["point_indices"]]})
        out["gt_parts"] = parts
    return out


def save_shape(path: str | Path, shape: dict, externalize_over: int | None = None) -> None:
    """Write a shape fixture; arrays above the element threshold go to a .bin sibling."""
    path = Path(path)
    doc: dict = {"id": shape["id"]}
    for key in ("points", "geo_features", "app_features"):
        if key not in shape:
            continue
        arr = np.asarray(shape[key], dtype=np.float64)
        if externalize_over is not None and arr.size > externalize_over:
            blob_name = f"{path.stem}.{key}.bin"
            (path.parent / blob_name).write_bytes(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            doc[key] = {"external": blob_name, "shape": list(arr.shape), "byte_order": "little"}
        else:
            doc[key] = arr.tolist()
    if "gt_parts" in shape:
        doc["gt_parts"] = shape["gt_parts"]
    path.write_text(canonical_json(doc))


# --- embedding files -------------------------------------------------------


def load_embeddings(path: str | Path) -> dict[str, Array]:
    """Label -> unit vector map; renormalizes on load, warning on large drift."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for label, values in doc.items():
        v = np.asarray(values, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError(f"zero embedding for label {label!r}")
        if abs(norm - 1.0) > 1e-6:
            log.warning("embedding %r renormalized (norm was %.6g)", label, norm)
        out[label] = v / norm
    return out


def save_embeddings(path: str | Path, embeddings: dict[str, Array]) -> None:
    Path(path).write_text(canonical_json({k: np.asarray(v).tolist() for k, v in embeddings.items()}))


# --- named-tensor weight container ----------------------------------------

_MAGIC = "partmatch-tensors-v1"


def save_tensors(path: str | Path, tensors: dict[str, Array]) -> None:
    """Single file: one JSON manifest line, then concatenated little-endian fp64 payloads."""
    names = sorted(tensors)
    manifest = {
        "format": _MAGIC,
        "byte_order": "little",
        "dtype": "f8",
        "tensors": [{"name": n, "shape": list(np.asarray(tensors[n]).shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write((canonical_json(manifest) + "\n").encode("utf-8"))
        for n in names:
            fh.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())


def load_tensors(path: str | Path) -> dict[str, Array]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8")
        manifest = json.loads(header)
        if manifest.get("format") != _MAGIC:
            raise ValueError(f"not a tensor container: {path}")
        out = {}
        for entry in manifest["tensors"]:
            shape = entry["shape"]
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"truncated payload for tensor {entry['name']!r}")
            out[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return out


# --- prediction files ------------------------------------------------------

PREDICTION_KEYS = {"shape_id", "category", "partlets", "unlabeled_count"}
PARTLET_KEYS = {"name", "conf_soft", "conf_maha", "conf_fused", "mask_point_indices"}


def validate_prediction(doc: dict) -> dict:
    """Schema check for a prediction record; returns the record."""
    missing = PREDICTION_KEYS - set(doc)
    if missing:
        raise ValueError(f"prediction missing keys: {sorted(missing)}")
    if not isinstance(doc["shape_id"], str) or not doc["shape_id"]:
        raise ValueError("shape_id must be a nonempty string")
    for p in doc["partlets"]:
        missing = PARTLET_KEYS - set(p)
        if missing:
            raise ValueError(f"partlet entry missing keys: {sorted(missing)}")
        for key in ("conf_soft", "conf_maha", "conf_fused"):
            v = p[key]
            if not isinstance(v, (int, float)) or not (0.0 <= float(v) <= 1.0):
                raise ValueError(f"partlet {key} must be a number in [0, 1]")
    return doc


def load_prediction(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return validate_prediction(json.load(fh))


def save_prediction(path: str | Path, doc: dict) -> None:
    Path(path).write_text(canonical_json(validate_prediction(doc)))
