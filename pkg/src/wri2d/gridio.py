"""File formats: binary grid files with JSON sidecar headers, data-set
directories, survey files, metrics CSV, and run manifests.

A grid file is a raw little-endian payload of nz*nx values in
depth-fastest order plus a sidecar ``<payload>.json`` header with keys
nz, nx, dz, dx, dtype ("f64" or "c128") and order ("depth-fastest").
Model files store velocity in m/s. Data files reuse the same container
with nz = receiver count and nx = source count, one file per frequency.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .helmholtz import PmlProfile
from .model import Grid, Model, velocity_to_slowness2
from .survey import DataSet, Survey

_DTYPES = {"f64": "<f8", "c128": "<c16"}

METRICS_COLUMNS = (
    "iter",
    "data_residual",
    "wave_residual",
    "model_error",
    "wavefield_error",
    "tv",
    "objective_J",
    "gamma",
    "lambda1",
)


def header_path(path) -> Path:
    return Path(str(path) + ".json")


def write_grid(path, values: np.ndarray, nz: int, nx: int, dz: float, dx: float,
               dtype: str) -> None:
    """Write a raw grid payload and its sidecar header."""
    if dtype not in _DTYPES:
        raise ValidationError(f"unsupported dtype {dtype!r}")
    flat = np.asarray(values).reshape(-1)
    if flat.size != nz * nx:
        raise ValidationError(f"payload needs {nz * nx} values, got {flat.size}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flat.astype(_DTYPES[dtype]).tofile(path)
    header = {"nz": nz, "nx": nx, "dz": dz, "dx": dx,
              "dtype": dtype, "order": "depth-fastest"}
    header_path(path).write_text(json.dumps(header, indent=1) + "\n")


def read_grid(path) -> tuple[dict, np.ndarray]:
    """Read a grid file; returns (header dict, flat values)."""
    path = Path(path)
    hp = header_path(path)
    if not hp.exists():
        raise ValidationError(f"missing sidecar header {hp}")
    try:
        header = json.loads(hp.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed header {hp}: {exc}") from exc
    for key in ("nz", "nx", "dz", "dx", "dtype", "order"):
        if key not in header:
            raise ValidationError(f"header {hp} lacks key {key!r}")
    if header["order"] != "depth-fastest":
        raise ValidationError(f"unsupported storage order {header['order']!r}")
    if header["dtype"] not in _DTYPES:
        raise ValidationError(f"unsupported dtype {header['dtype']!r}")
    values = np.fromfile(path, dtype=_DTYPES[header["dtype"]])
    if values.size != header["nz"] * header["nx"]:
        raise ValidationError(
            f"{path}: payload has {values.size} values, header promises "
            f"{header['nz'] * header['nx']}"
        )
    return header, values


def write_model_file(path, m: Model) -> None:
    """Store a model as a velocity grid file (f64, m/s).

    Cells where a solver output left the physical range (squared slowness
    <= 0, possible without bound constraints) are emitted as NaN.
    """
    g = m.grid
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(m.values > 0, 1.0 / np.sqrt(np.abs(m.values)), np.nan)
    write_grid(path, v, g.nz, g.nx, g.dz, g.dx, "f64")


def read_model_file(path) -> Model:
    header, values = read_grid(path)
    if header["dtype"] != "f64":
        raise ValidationError(f"{path}: model files must be f64 velocity grids")
    grid = Grid(header["nz"], header["nx"], header["dz"], header["dx"])
    return velocity_to_slowness2(grid, values)


# -- survey files ---------------------------------------------------------


def write_survey(path, survey: Survey) -> None:
    doc = {
        "sources": [list(p) for p in survey.sources],
        "receivers": [list(p) for p in survey.receivers],
        "frequencies_hz": list(survey.frequencies),
        "ricker_f_dom_hz": survey.ricker_f_dom_hz,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_survey(path) -> Survey:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed survey file {path}: {exc}") from exc
    try:
        return Survey(
            sources=tuple((float(x), float(z)) for x, z in doc["sources"]),
            receivers=tuple((float(x), float(z)) for x, z in doc["receivers"]),
            frequencies=tuple(float(f) for f in doc["frequencies_hz"]),
            ricker_f_dom_hz=float(doc.get("ricker_f_dom_hz", 5.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"survey file {path} lacks required fields: {exc}") from exc


# -- data set directories ---------------------------------------------------


def data_file_name(freq_hz: float) -> str:
    return f"data_f{int(round(freq_hz * 1000))}.bin"


def write_dataset(
    directory,
    dataset: DataSet,
    survey: Survey,
    grid: Grid,
    pml: PmlProfile,
    seed: int | None,
) -> None:
    """One complex grid file per frequency plus the acquisition manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nf, ns, m_rec = dataset.entries.shape
    for i, f in enumerate(survey.frequencies):
        # shape M x n_sources, receiver index fastest
        write_grid(
            directory / data_file_name(f),
            dataset.entries[i].T.reshape(-1, order="F"),
            m_rec, ns, 1.0, 1.0, "c128",
        )
    manifest = {
        "sources": [list(p) for p in survey.sources],
        "receivers": [list(p) for p in survey.receivers],
        "frequencies_hz": list(survey.frequencies),
        "ricker_f_dom_hz": survey.ricker_f_dom_hz,
        "snr_db": dataset.snr_db,
        "seed": seed,
        "noise_norms": None if dataset.noise_norms is None
        else dataset.noise_norms.tolist(),
        "grid": {"nz": grid.nz, "nx": grid.nx, "dz": grid.dz, "dx": grid.dx},
        "pml": {"n_pml": pml.n_pml, "sigma_max": pml.sigma_max,
                "exponent": pml.exponent},
    }
    (directory / "data_manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def read_dataset(directory) -> tuple[Survey, DataSet, Grid, PmlProfile]:
    directory = Path(directory)
    mpath = directory / "data_manifest.json"
    if not mpath.exists():
        raise ValidationError(f"missing data manifest {mpath}")
    doc = json.loads(mpath.read_text())
    survey = Survey(
        sources=tuple((float(x), float(z)) for x, z in doc["sources"]),
        receivers=tuple((float(x), float(z)) for x, z in doc["receivers"]),
        frequencies=tuple(float(f) for f in doc["frequencies_hz"]),
        ricker_f_dom_hz=float(doc.get("ricker_f_dom_hz", 5.0)),
    )
    grid = Grid(**doc["grid"])
    pml = PmlProfile(**doc["pml"])
    entries = np.zeros(
        (len(survey.frequencies), survey.n_sources, survey.n_receivers), dtype=complex
    )
    for i, f in enumerate(survey.frequencies):
        header, values = read_grid(directory / data_file_name(f))
        if header["dtype"] != "c128":
            raise ValidationError("data files must be c128")
        entries[i] = values.reshape(
            (header["nz"], header["nx"]), order="F"
        ).T
    norms = doc.get("noise_norms")
    return survey, DataSet(
        entries,
        doc.get("snr_db"),
        None if norms is None else np.asarray(norms, dtype=float),
    ), grid, pml


# -- metrics CSV -------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.17g}"


def write_metrics_csv(path, metrics) -> None:
    """One row per outer iteration, 17 significant digits, blank optionals."""
    lines = [",".join(METRICS_COLUMNS)]
    for m in metrics:
        lines.append(",".join([
            str(m.iteration),
            _fmt(m.data_residual),
            _fmt(m.wave_residual),
            _fmt(m.model_error),
            _fmt(m.wavefield_error),
            _fmt(m.tv),
            _fmt(m.objective_j),
            _fmt(m.gamma),
            _fmt(m.lambda1),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path) -> dict[str, np.ndarray]:
    """Columns as float arrays (nan where blank), keyed by header name."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ValidationError(f"empty metrics file {path}")
    names = text[0].split(",")
    rows = [line.split(",") for line in text[1:]]
    out: dict[str, np.ndarray] = {}
    for j, name in enumerate(names):
        col = [r[j] if j < len(r) else "" for r in rows]
        out[name] = np.array([float(c) if c else np.nan for c in col])
    return out


# -- run manifest -------------------------------------------------------------


def write_manifest(path, resolved_config: dict, extra: dict | None = None) -> None:
    from . import __version__

    doc = {"package": "wri2d", "version": __version__, "config": resolved_config}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if "config" not in doc:
        raise ValidationError(f"{path} is not a run manifest")
    return doc
