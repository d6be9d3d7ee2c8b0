"""Spatial histograms and volume-weighted field statistics."""

import numpy as np

from .mesh import Field


class PostprocError(ValueError):
    pass


def _flat(field):
    if isinstance(field, Field):
        if field.rank != "scalar":
            raise PostprocError("histograms and metrics need scalar fields")
        return field.values
    v = np.asarray(field, dtype=float)
    if v.ndim != 1:
        raise PostprocError(f"expected a flat scalar array, got shape "
                            f"{v.shape}")
    return v


def spatial_pdf(field, bins, spacing="linear", weights=None):
    """Volume-weighted normalized histogram (integrates to 1).

    Returns ``(density, edges)``.  With ``spacing='log'`` the bin edges
    are geometric, which requires strictly positive data.  ``weights``
    defaults to uniform (uniform grids have equal cell volumes).
    """
    v = _flat(field)
    if bins < 1:
        raise PostprocError(f"bins must be >= 1, got {bins}")
    if spacing not in ("linear", "log"):
        raise PostprocError(f"spacing must be linear or log, got {spacing!r}")
    if weights is None:
        weights = np.ones_like(v)
    lo, hi = float(np.min(v)), float(np.max(v))
    if spacing == "log":
        n_bad = int(np.count_nonzero(v <= 0.0))
        if n_bad:
            raise PostprocError(f"log spacing needs positive data; "
                                f"{n_bad} values are <= 0")
        edges = np.geomspace(lo, hi, bins + 1)
    else:
        edges = np.linspace(lo, hi, bins + 1)
    if lo == hi:    # constant field: one occupied bin of unit width
        edges = np.linspace(lo - 0.5, hi + 0.5, bins + 1)
    counts, edges = np.histogram(v, bins=edges, weights=weights)
    total = np.sum(counts)
    widths = np.diff(edges)
    density = counts / (total * widths)
    return density, edges


def field_metrics(field, mesh=None):
    """Volume-weighted mean, variance, min, max and volume integral."""
    v = _flat(field)
    if isinstance(field, Field):
        mesh = field.mesh
    if mesh is None:
        raise PostprocError("field_metrics needs a mesh (or a Field)")
    vol = mesh.cell_volume
    mean = float(np.mean(v))
    return {
        "mean": mean,
        "variance": float(np.mean((v - mean) ** 2)),
        "min": float(np.min(v)),
        "max": float(np.max(v)),
        "integral": float(np.sum(v) * vol),
    }
