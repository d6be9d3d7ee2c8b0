"""Truncation rules: mapping continuous GRFs to discrete facies fields."""

import numpy as np
from scipy.special import ndtr, ndtri

from ..mesh import Field
from .covariance import CovarianceError


class TruncationRule:
    """Threshold bins and the facies value table.

    Single truncation: ``thresholds`` (I values) and ``values`` of length
    I+1.  Bi-truncation adds ``thresholds2`` (J values) and ``values``
    becomes an (I+1) x (J+1) table; merged facies are expressed by
    repeating a value.  Thresholds are raw field values unless
    ``percentile=True``, in which case they are probabilities converted
    through the standard normal quantile.
    """

    def __init__(self, thresholds, values, thresholds2=None, percentile=False):
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.thresholds2 = (None if thresholds2 is None
                            else np.asarray(thresholds2, dtype=float))
        self.values = np.asarray(values, dtype=float)
        self.percentile = bool(percentile)
        self._validate()

    def _validate(self):
        for t in (self.thresholds, self.thresholds2):
            if t is None:
                continue
            if t.ndim != 1:
                raise CovarianceError("thresholds must be a 1-D list")
            if np.any(np.diff(t) <= 0.0):
                raise CovarianceError(f"thresholds must be strictly "
                                      f"ascending, got {t.tolist()}")
            if self.percentile and (np.any(t <= 0.0) or np.any(t >= 1.0)):
                raise CovarianceError("percentile thresholds must lie in (0,1)")
        ni = len(self.thresholds) + 1
        if self.thresholds2 is None:
            if self.values.shape != (ni,):
                raise CovarianceError(
                    f"values must have length {ni}, got {self.values.shape}")
        else:
            nj = len(self.thresholds2) + 1
            if self.values.shape != (ni, nj):
                raise CovarianceError(
                    f"values must be {ni}x{nj}, got {self.values.shape}")

    def raw_thresholds(self, which=1, marginal_std=1.0):
        t = self.thresholds if which == 1 else self.thresholds2
        if self.percentile:
            return marginal_std * ndtri(t)
        return t

    @property
    def bivariate(self):
        return self.thresholds2 is not None


def _bins(z, thresholds):
    # bin i: t_{i-1} < z <= t_i with t_0 = -inf, t_{I+1} = +inf
    return np.searchsorted(thresholds, z, side="left")


def truncate(z, rule, marginal_std=1.0):
    """Single-truncation: map one GRF through the threshold bins."""
    if rule.bivariate:
        raise CovarianceError("rule has thresholds2; use bitruncate")
    zv = z.values if isinstance(z, Field) else np.asarray(z, dtype=float)
    t = rule.raw_thresholds(1, marginal_std)
    out = rule.values[_bins(zv, t)]
    if isinstance(z, Field):
        return Field(z.mesh, out, "scalar", "facies")
    return out


def bitruncate(z1, z2, rule, marginal_std=1.0):
    """Bi-truncation: two independent GRFs index the 2-D value table."""
    if not rule.bivariate:
        raise CovarianceError("rule lacks thresholds2; use truncate")
    f1, f2 = isinstance(z1, Field), isinstance(z2, Field)
    if f1 and f2 and z1.mesh is not z2.mesh:
        if z1.mesh.n != z2.mesh.n or np.any(z1.mesh.lengths != z2.mesh.lengths):
            raise CovarianceError("bitruncate requires fields on the same mesh")
    a = z1.values if f1 else np.asarray(z1, dtype=float)
    b = z2.values if f2 else np.asarray(z2, dtype=float)
    if a.shape != b.shape:
        raise CovarianceError("bitruncate inputs must have the same shape")
    i = _bins(a, rule.raw_thresholds(1, marginal_std))
    j = _bins(b, rule.raw_thresholds(2, marginal_std))
    out = rule.values[i, j]
    if f1:
        return Field(z1.mesh, out, "scalar", "facies")
    return out


def facies_proportion(rule, i, j=None):
    """Analytic bin probability under independent standard normal GRFs."""
    def marginal(thresholds, idx):
        edges = np.concatenate([[-np.inf], thresholds, [np.inf]])
        if not 0 <= idx < len(edges) - 1:
            raise CovarianceError(f"bin index {idx} out of range")
        lo, hi = edges[idx], edges[idx + 1]
        return ndtr(hi) - ndtr(lo)

    t1 = rule.raw_thresholds(1) if len(rule.thresholds) else np.zeros(0)
    p = marginal(t1, i)
    if rule.bivariate:
        if j is None:
            raise CovarianceError("bivariate rule needs both bin indices")
        p *= marginal(rule.raw_thresholds(2), j)
    return p
