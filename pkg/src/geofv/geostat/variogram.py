"""Empirical (sample) variogram estimation for verification runs."""

import numpy as np

from ..mesh import Field
from .covariance import CovarianceError

EMPTY_BIN = np.nan


def empirical_variogram(z, n_lags, max_lag, max_samples=3000, seed=12345):
    """Isotropic semivariance estimate binned by pair distance.

    Returns ``(r, gamma_hat, counts)`` where ``r`` is the mean pair
    distance per bin.  Empty bins report NaN, not silent removal.  For
    large meshes a reproducible random subset of cells bounds the
    pairwise work.
    """
    if not isinstance(z, Field):
        raise CovarianceError("empirical_variogram needs a cell Field")
    mesh = z.mesh
    if max_lag > 0.5 * np.min(mesh.lengths[np.array(mesh.n) > 1]):
        raise CovarianceError("max_lag must be <= half the smallest "
                              "domain extent")
    if n_lags < 1:
        raise CovarianceError("n_lags must be >= 1")

    pts = mesh.cell_centers
    vals = z.values
    if mesh.n_cells > max_samples:
        rng = np.random.Generator(np.random.Philox(key=seed))
        pick = rng.choice(mesh.n_cells, size=max_samples, replace=False)
        pick.sort()
        pts, vals = pts[pick], vals[pick]

    edges = np.linspace(0.0, max_lag, n_lags + 1)
    sums = np.zeros(n_lags)
    rsum = np.zeros(n_lags)
    counts = np.zeros(n_lags, dtype=np.int64)
    block = 512
    n = len(vals)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        d = np.linalg.norm(pts[i0:i1, None, :] - pts[None, i1:, :], axis=-1)
        dz = vals[i0:i1, None] - vals[None, i1:]
        # pairs strictly across the block boundary plus the intra-block
        # upper triangle
        di = np.linalg.norm(pts[i0:i1, None, :] - pts[None, i0:i1, :], axis=-1)
        dzi = vals[i0:i1, None] - vals[None, i0:i1]
        iu = np.triu_indices(i1 - i0, k=1)
        d = np.concatenate([d.ravel(), di[iu]])
        dz = np.concatenate([dz.ravel(), dzi[iu]])
        sel = (d > 0.0) & (d <= max_lag)
        d, dz = d[sel], dz[sel]
        which = np.minimum(np.searchsorted(edges, d, side="left") - 1,
                           n_lags - 1)
        which = np.maximum(which, 0)
        np.add.at(sums, which, 0.5 * dz ** 2)
        np.add.at(rsum, which, d)
        np.add.at(counts, which, 1)

    with np.errstate(invalid="ignore"):
        gamma_hat = np.where(counts > 0, sums / np.maximum(counts, 1),
                             EMPTY_BIN)
        r = np.where(counts > 0, rsum / np.maximum(counts, 1), EMPTY_BIN)
    return r, gamma_hat, counts
