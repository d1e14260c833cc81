"""File formats: points CSV, sorted-key JSON, partitions and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .partition import ConvexPartition

__all__ = ["dumps", "file_digest", "read_points", "write_json", "write_points",
           "load_partition", "save_partition", "write_manifest"]


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def write_points(path, points) -> None:
    """CSV with header ``x0,...,xd`` and 17 significant digits per entry."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(pts.shape[1])])
        for row in pts:
            w.writerow(["%.17g" % v for v in row])


def read_points(path, unit_tol: float = 1e-8) -> np.ndarray:
    """Inverse of :func:`write_points`; rows must be unit vectors within ``unit_tol``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != [f"x{k}" for k in range(len(header))] or len(header) < 2:
        raise ValueError(f"{path}: header must be x0,x1,...,xd")
    try:
        pts = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry") from exc
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != len(header):
        raise ValueError(f"{path}: ragged or empty point table")
    if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > unit_tol):
        raise ValueError(f"{path}: rows are not unit vectors")
    return pts


def save_partition(path, partition: ConvexPartition) -> None:
    write_json(path, partition.to_dict())


def load_partition(path) -> ConvexPartition:
    try:
        data = json.loads(Path(path).read_text())
        return ConvexPartition.from_dict(data)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: malformed partition file ({exc})") from exc


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command: str, params: dict, version: str, inputs: list,
                   outputs: list, wall_time: float) -> None:
    write_json(path, {
        "command": command,
        "params": params,
        "seed": params.get("seed"),
        "version": version,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
        "wall_time": wall_time,
    })
