"""Raw field snapshots, CSV tables and JSON reports.

Snapshot layout: 8-byte magic, three ``uint32`` dims, a ``uint32`` component
count and the spacing ``h`` as ``float64``, then the values as little-endian
``(re, im)`` float64 pairs, component-major and x-fastest within a component.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

MAGIC = b"MXSTAB01"
_HEADER = struct.Struct("<8s3IId")


def write_raw(path, arr: np.ndarray, h: float) -> None:
    """Write ``arr`` of shape ``(ncomp, n1, n2, n3)`` (or ``(n1, n2, n3)``)."""
    a = np.asarray(arr, complex)
    if a.ndim == 3:
        a = a[None]
    if a.ndim != 4:
        raise ValueError("snapshot must have shape (ncomp, n1, n2, n3)")
    nc, n1, n2, n3 = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n1, n2, n3, nc, float(h)))
        for comp in a:
            fh.write(np.asfortranarray(comp).astype("<c16").tobytes(order="F"))


def read_raw(path) -> tuple[np.ndarray, float]:
    """Inverse of :func:`write_raw`: ``(array (ncomp, n1, n2, n3), h)``."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, n1, n2, n3, nc, h = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != nc * n1 * n2 * n3:
        raise ValueError(f"{path}: truncated snapshot")
    comps = data.reshape(nc, -1)
    return np.stack([c.reshape((n1, n2, n3), order="F") for c in comps]).astype(complex), h


def write_csv(path, rows: list[dict]) -> None:
    rows = list(rows)
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: _scalar(v) for k, v in r.items()})


def _scalar(v):
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, np.generic):
        return v.item()
    return v


def to_jsonable(obj):
    """Recursively convert numpy and complex values for ``json``."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
