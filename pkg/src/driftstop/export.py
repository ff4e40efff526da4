"""CSV and JSON artifacts.

Numbers are written with ``repr`` (shortest round-trip form) and rows end in
``\\n``, so identical inputs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .pde import Boundary, ValueSurface


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_surface(path, surface: ValueSurface) -> Path:
    t, x, v = surface.t, surface.x, surface.v
    rows = ((t[i], x[j], v[i, j]) for i in range(t.size) for j in range(x.size))
    return write_csv(path, ["t", "x", "v"], rows)


def write_boundary(path, boundary: Boundary) -> Path:
    return write_csv(path, ["t", "h"], zip(boundary.t_nodes, boundary.h))


def read_boundary(path) -> Boundary:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read boundary file {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise ConfigError(f"boundary file {path} must have columns t,h")
    return Boundary(data[:, 0], data[:, 1])
