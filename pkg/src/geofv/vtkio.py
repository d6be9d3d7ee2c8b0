"""VTK legacy ASCII output (structured points, cell data) and CSV tables.

Formatting is deterministic: 9 significant digits everywhere, fields
written in sorted name order, so identical data produces byte-identical
files.
"""

import numpy as np

from .mesh import Field

FMT = "%.9g"


class VTKError(ValueError):
    pass


def _fmt(x):
    return FMT % float(x)


def _check_finite(name, values):
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if np.any(bad):
        cells = np.unique(np.argwhere(bad)[:, 0])
        raise VTKError(f"field {name!r} has non-finite values in cells "
                       f"{cells[:10].tolist()}")


def write_vtk(path, mesh, fields, title="geofv output"):
    """Write cell fields on a structured-points grid.

    ``fields`` maps name -> Field or flat array (scalar (n,), vector
    (n, 3)).  Values appear in cell lexicographic order (x fastest),
    which is the native cell ordering.
    """
    named = {}
    for name in sorted(fields):
        v = fields[name]
        v = v.values if isinstance(v, Field) else np.asarray(v, dtype=float)
        if v.shape not in ((mesh.n_cells,), (mesh.n_cells, 3)):
            raise VTKError(f"field {name!r} shape {v.shape} does not fit "
                           f"the mesh ({mesh.n_cells} cells)")
        _check_finite(name, v)
        named[name] = v

    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} {mesh.nz + 1}",
        "ORIGIN " + " ".join(_fmt(v) for v in mesh.origin),
        "SPACING " + " ".join(_fmt(v) for v in mesh.spacing),
        f"CELL_DATA {mesh.n_cells}",
    ]
    for name, v in named.items():
        if v.ndim == 1:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(x) for x in v)
        else:
            lines.append(f"VECTORS {name} double")
            lines.extend(" ".join(_fmt(x) for x in row) for row in v)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Minimal reader for files produced by :func:`write_vtk`.

    Returns (dims, origin, spacing, fields) with fields as flat arrays in
    cell order.  Only the subset of the legacy format this package writes
    is supported.
    """
    with open(path) as fh:
        tokens_lines = fh.read().splitlines()
    it = iter(tokens_lines)
    header = [next(it) for _ in range(4)]
    if header[2] != "ASCII" or header[3] != "DATASET STRUCTURED_POINTS":
        raise VTKError(f"unsupported VTK layout in {path}")
    dims = tuple(int(v) for v in next(it).split()[1:])
    origin = np.array([float(v) for v in next(it).split()[1:]])
    spacing = np.array([float(v) for v in next(it).split()[1:]])
    n_cells = int(next(it).split()[1])
    fields = {}
    for line in it:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "SCALARS":
            name = parts[1]
            next(it)                       # LOOKUP_TABLE
            vals = [float(next(it)) for _ in range(n_cells)]
            fields[name] = np.array(vals)
        elif parts[0] == "VECTORS":
            name = parts[1]
            vals = [[float(v) for v in next(it).split()]
                    for _ in range(n_cells)]
            fields[name] = np.array(vals)
        else:
            raise VTKError(f"unexpected record {parts[0]!r} in {path}")
    return dims, origin, spacing, fields


def write_csv(path, header, rows):
    """Comma-separated table with a header row, 9 significant digits."""
    lines = [",".join(header)]
    ncol = len(header)
    for row in rows:
        if len(row) != ncol:
            raise VTKError(f"row width {len(row)} != header width {ncol}")
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float,
                                                        np.floating))
                              else str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
