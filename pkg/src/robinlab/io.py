"""CSV artifacts.  Floats are written with 17 significant digits so that a
rerun with the same inputs produces byte-identical files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .domain import BoundaryTrace, GridFunction, GridSpec
from .errors import ConfigurationError, MetadataMismatch
from .impedance import BoundaryOperator


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return f"{float(x):.17g}"


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_grid_function(path, f: GridFunction):
    """Rows ``x,y,re,im`` over the full grid, ``x`` fastest, corners skipped."""
    grid = f.grid
    table = grid.index_map
    rows = []
    for j in range(grid.n + 2):
        for i in range(grid.n + 2):
            k = table[i, j]
            if k < 0:
                continue
            z = f.values[k]
            rows.append((i * grid.h, j * grid.h, z.real, z.imag))
    return write_rows(path, ["x", "y", "re", "im"], rows)


def read_grid_function(path, grid: GridSpec) -> GridFunction:
    header, rows = read_rows(path)
    if header != ["x", "y", "re", "im"]:
        raise ConfigurationError(f"{path}: not a grid-function file")
    if len(rows) != grid.n_nodes:
        raise MetadataMismatch(f"{path}: {len(rows)} rows for a grid with {grid.n_nodes} nodes")
    vals = np.zeros(grid.n_nodes, dtype=complex)
    for x, y, re, im in rows:
        i, j = round(float(x) / grid.h), round(float(y) / grid.h)
        vals[grid.index_map[i, j]] = complex(float(re), float(im))
    return GridFunction(grid, vals)


def write_boundary_trace(path, t: BoundaryTrace):
    b = t.boundary
    rows = [(s, x, y, z.real, z.imag) for s, (x, y), z in zip(b.arclength, b.xy, t.values)]
    return write_rows(path, ["s", "x", "y", "re", "im"], rows)


def read_boundary_trace(path, grid: GridSpec) -> BoundaryTrace:
    header, rows = read_rows(path)
    if header != ["s", "x", "y", "re", "im"] or len(rows) != grid.n_boundary:
        raise MetadataMismatch(f"{path}: not a trace for n={grid.n}")
    return BoundaryTrace(grid.boundary, [complex(float(r[3]), float(r[4])) for r in rows])


def write_boundary_operator(path, M: BoundaryOperator):
    """Entries ``i,j,re,im`` plus a ``.json`` sidecar with the metadata."""
    path = Path(path)
    m = M.matrix
    rows = ((i, j, m[i, j].real, m[i, j].imag) for i in range(m.shape[0]) for j in range(m.shape[1]))
    write_rows(path, ["i", "j", "re", "im"], rows)
    write_json(path.with_suffix(".json"), M.metadata())
    return path


def read_boundary_operator(path) -> BoundaryOperator:
    path = Path(path)
    side = path.with_suffix(".json")
    if not side.exists():
        raise MetadataMismatch(f"missing metadata sidecar {side}")
    meta = json.loads(side.read_text())
    header, rows = read_rows(path)
    if header != ["i", "j", "re", "im"]:
        raise ConfigurationError(f"{path}: not a boundary-operator file")
    size = 4 * int(meta["n"])
    if len(rows) != size * size:
        raise MetadataMismatch(f"{path}: {len(rows)} entries, sidecar says n={meta['n']}")
    mat = np.zeros((size, size), dtype=complex)
    for i, j, re, im in rows:
        mat[int(i), int(j)] = complex(float(re), float(im))
    return BoundaryOperator(mat, float(meta["alpha"]), float(meta["E"]), int(meta["n"]), meta["kind"])


def write_green_table(path, G):
    """Rows ``src_i,src_j,x_i,x_j,re,im``: grid indices of source and target."""
    grid = G.grid
    ij = grid.node_ij
    rows = []
    for k, s in enumerate(G.sources):
        si, sj = ij[s]
        col = G.matrix[:, k]
        for node in range(grid.n_nodes):
            rows.append((si, sj, ij[node, 0], ij[node, 1], col[node].real, col[node].imag))
    return write_rows(path, ["src_i", "src_j", "x_i", "x_j", "re", "im"], rows)
