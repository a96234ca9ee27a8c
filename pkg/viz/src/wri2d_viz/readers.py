"""Parsers for the wri2d on-disk formats.

This package reads files only; it never imports the solver. A grid file
is a raw little-endian payload with a ``<payload>.json`` sidecar header
(keys nz, nx, dz, dx, dtype, order). Metrics CSVs carry one row per
outer iteration under a fixed header. Run manifests are JSON with the
resolved config under "config".
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

_DTYPES = {"f64": "<f8", "c128": "<c16"}


class FormatError(ValueError):
    """Input file does not follow the documented layout."""


def read_grid(path):
    """Return (header dict, 2D array shaped (nz, nx)) for a grid file."""
    path = Path(path)
    header_file = Path(str(path) + ".json")
    if not path.exists():
        raise FormatError(f"no such grid file: {path}")
    if not header_file.exists():
        raise FormatError(f"missing sidecar header: {header_file}")
    try:
        header = json.loads(header_file.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed header {header_file}: {exc}") from exc
    missing = {"nz", "nx", "dz", "dx", "dtype", "order"} - set(header)
    if missing:
        raise FormatError(f"header {header_file} lacks keys {sorted(missing)}")
    if header["order"] != "depth-fastest":
        raise FormatError(f"unsupported order {header['order']!r}")
    if header["dtype"] not in _DTYPES:
        raise FormatError(f"unsupported dtype {header['dtype']!r}")
    flat = np.fromfile(path, dtype=_DTYPES[header["dtype"]])
    n = header["nz"] * header["nx"]
    if flat.size != n:
        raise FormatError(f"{path}: expected {n} values, found {flat.size}")
    return header, flat.reshape((header["nz"], header["nx"]), order="F")


def read_velocity_grid(path):
    """Grid file holding a velocity model (f64)."""
    header, arr = read_grid(path)
    if header["dtype"] != "f64":
        raise FormatError(f"{path}: velocity grids must be f64")
    return header, arr


def read_metrics(path):
    """Metrics CSV as {column: float array}; blank cells become nan."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"no such metrics file: {path}")
    lines = path.read_text().strip().splitlines()
    if len(lines) < 2:
        raise FormatError(f"{path}: no data rows")
    names = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    out = {}
    for j, name in enumerate(names):
        cells = [r[j] if j < len(r) else "" for r in rows]
        try:
            out[name] = np.array([float(c) if c else np.nan for c in cells])
        except ValueError as exc:
            raise FormatError(f"{path}: column {name!r} not numeric: {exc}") from exc
    return out


def read_manifest(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    if "config" not in doc:
        raise FormatError(f"{path} is not a run manifest (no 'config')")
    return doc


def isotropic_tv_of_velocity(arr: np.ndarray) -> float:
    """TV of the squared-slowness field implied by a velocity grid, using
    unit-spacing forward differences (matching the solver's metric)."""
    m = 1.0 / arr.astype(float) ** 2
    gz = np.zeros_like(m)
    gx = np.zeros_like(m)
    gz[:-1, :] = m[1:, :] - m[:-1, :]
    gx[:, :-1] = m[:, 1:] - m[:, :-1]
    return float(np.hypot(gx, gz).sum())
