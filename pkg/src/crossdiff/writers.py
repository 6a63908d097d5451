"""Output files: CSV diagnostics, snapshots, study tables, JSON summary.

Floats are written with ``repr`` (shortest round-trip form), so files are
byte-identical whenever the numbers are.  Header layouts are versioned
through ``FORMATS``; the summary records the version of every file kind.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
FORMATS = {
    "diagnostics.csv": FORMAT_VERSION,
    "snapshot_csv": FORMAT_VERSION,
    "snapshot_vtk": FORMAT_VERSION,
    "eoc.csv": FORMAT_VERSION,
    "astar_sweep.csv": FORMAT_VERSION,
    "summary.json": FORMAT_VERSION,
}


def _f(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else
                                             ("inf" if x > 0 else "-inf"))


def diagnostics_header(n_species: int) -> list:
    return (["step", "t", "entropy", "relative_entropy", "dissipation"]
            + [f"mass_{i + 1}" for i in range(n_species)]
            + ["newton_iterations", "path_length"])


class DiagnosticsWriter:
    """Observer streaming one CSV row per step; use as a context manager."""

    def __init__(self, path, n_species: int):
        self.path = Path(path)
        self.n_species = n_species
        self._fh = None

    def __enter__(self):
        self._fh = open(self.path, "w", newline="")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(diagnostics_header(self.n_species))
        return self

    def __exit__(self, *exc):
        self._fh.close()

    def __call__(self, step, t, U, report):
        mass = report.mass if report.mass is not None else [float("nan")] * self.n_species
        self._csv.writerow([step, _f(t), _f(report.entropy), _f(report.relative_entropy),
                            _f(report.dissipation), *map(_f, mass),
                            report.newton_iterations, report.path_length])
        self._fh.flush()


def write_snapshot(directory, step: int, U, mesh) -> Path:
    """1D: ``snapshot_<step>.csv`` with columns x, u_1..u_N.
    2D: ``snapshot_<step>.vtk``, legacy ASCII structured points, cell data."""
    directory = Path(directory)
    U = np.asarray(U)
    n = U.shape[0]
    if mesh.dimension == 1:
        path = directory / f"snapshot_{step:06d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x"] + [f"u_{i + 1}" for i in range(n)])
            for k, x in enumerate(mesh.cell_centers[:, 0]):
                w.writerow([_f(x)] + [_f(U[i, k]) for i in range(n)])
        return path
    nx, ny = mesh.shape
    (x0, x1), (y0, y1) = mesh.bounds
    path = directory / f"snapshot_{step:06d}.vtk"
    lines = ["# vtk DataFile Version 3.0",
             f"crossdiff snapshot step {step} format {FORMAT_VERSION}",
             "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nx + 1} {ny + 1} 1",
             f"ORIGIN {_f(x0)} {_f(y0)} 0",
             f"SPACING {_f((x1 - x0) / nx)} {_f((y1 - y0) / ny)} 1",
             f"CELL_DATA {nx * ny}"]
    for i in range(n):
        lines += [f"SCALARS u_{i + 1} double 1", "LOOKUP_TABLE default"]
        lines += [_f(v) for v in U[i]]  # x-fastest, as VTK expects
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_cell_data(path) -> dict:
    """Parse the scalar fields written by :func:`write_snapshot` (2D)."""
    tokens = Path(path).read_text().split("\n")
    out, k = {}, 0
    ncell = None
    while k < len(tokens):
        line = tokens[k]
        if line.startswith("CELL_DATA"):
            ncell = int(line.split()[1])
        if line.startswith("SCALARS"):
            name = line.split()[1]
            out[name] = np.array([float(v) for v in tokens[k + 2:k + 2 + ncell]])
            k += 2 + ncell
            continue
        k += 1
    return out


def write_eoc(path, table) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cells", "error", "eoc"])
        for cells, err, order in table.rows():
            w.writerow([cells, _f(err), _f(order)])
    return Path(path)


def write_sweep(path, table) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["astar", "error", "ratio"])
        for a, err, ratio in table.rows():
            w.writerow([_f(a), _f(err), _f(ratio)])
    return Path(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_summary(path, payload: dict) -> Path:
    doc = {"format": "crossdiff-summary", "version": FORMAT_VERSION,
           "file_formats": FORMATS}
    doc.update(payload)
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return Path(path)


__all__ = ["FORMAT_VERSION", "FORMATS", "diagnostics_header", "DiagnosticsWriter",
           "write_snapshot", "read_vtk_cell_data", "write_eoc", "write_sweep",
           "write_summary"]
