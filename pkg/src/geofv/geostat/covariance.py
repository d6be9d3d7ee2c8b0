"""Covariance / variogram models and their spectral densities.

Four kinds are supported: gaussian, exponential, matern, spherical.  The
variogram rises from 0 to sigma2; the covariance is C(r) = sigma2 - gamma(r)
and it is the covariance that pairs with the spectral density (the
spectrum must be nonnegative and integrable).  The spherical model has no
usable spectrum here and is accepted only for variogram evaluation and
truncation workflows.

Spectra are parametrized in angular wavenumber k (so C(r) is recovered as
the inverse transform integral of S over k-space).  Anisotropy enters
through per-axis correlation lengths via the rescaling k_i -> k_i * l_i.
"""

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

KINDS = ("gaussian", "exponential", "matern", "spherical")


class CovarianceError(ValueError):
    pass


class UnsupportedSpectrumError(CovarianceError):
    pass


class CovarianceModel:
    """Isotropic-by-rescaling covariance model.

    ``lam`` holds the per-axis correlation lengths; scalar input is
    broadcast.  ``dim`` is the effective dimensionality used by the
    spectral density (2 for nz=1 grids).
    """

    def __init__(self, kind, sigma2=1.0, lam=1.0, nu=None, dim=3):
        if kind not in KINDS:
            raise CovarianceError(f"unknown covariance kind {kind!r}; "
                                  f"expected one of {KINDS}")
        if sigma2 <= 0.0:
            raise CovarianceError(f"sigma2 must be > 0, got {sigma2}")
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.size == 1:
            lam = np.full(3, lam[0])
        if lam.size != 3:
            lam = np.concatenate([lam, np.ones(3 - lam.size)])
        if np.any(lam <= 0.0):
            raise CovarianceError(f"correlation lengths must be > 0, got {lam}")
        if kind == "matern":
            if nu is None or nu <= 0.0:
                raise CovarianceError("matern requires nu > 0")
        if dim not in (1, 2, 3):
            raise CovarianceError(f"dim must be 1, 2 or 3, got {dim}")
        self.kind = kind
        self.sigma2 = float(sigma2)
        self.lam = lam
        self.nu = None if nu is None else float(nu)
        self.dim = int(dim)

    # -- real space ------------------------------------------------------

    def variogram(self, r):
        """gamma(r) using the first correlation length as the scale.

        Anisotropic callers pass the per-axis rescaled distance
        r = |x / lam| together with lam = 1.
        """
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise CovarianceError("lag distance must be >= 0")
        s2, lam = self.sigma2, self.lam[0]
        h = r / lam
        if self.kind == "gaussian":
            g = s2 * (1.0 - np.exp(-0.25 * np.pi * h ** 2))
        elif self.kind == "exponential":
            g = s2 * (1.0 - np.exp(-h))
        elif self.kind == "matern":
            nu = self.nu
            u = np.sqrt(2.0 * nu) * h
            with np.errstate(invalid="ignore"):
                core = (2.0 ** (1.0 - nu) / gamma_fn(nu)) * u ** nu * kv(nu, u)
            g = s2 * (1.0 - np.where(u > 0.0, core, 1.0))
            g = np.where(np.isfinite(g), g, s2)
        else:  # spherical
            g = np.where(h < 1.0, s2 * (1.5 * h - 0.5 * h ** 3), s2)
        return g if g.shape else float(g)

    def covariance(self, r):
        return self.sigma2 - self.variogram(r)

    # -- spectral space --------------------------------------------------

    def spectrum(self, k):
        """Spectral density at wave vector k (shape (..., 3) or scalar |k|).

        Per-axis rescaling k_i * lam_i is applied for vector input; scalar
        input is treated as an already-rescaled |k| * lam.
        """
        if self.kind == "spherical":
            raise UnsupportedSpectrumError(
                "the spherical model has no spectral density here; use "
                "gaussian, exponential or matern for field generation")
        k = np.asarray(k, dtype=float)
        if k.shape and k.shape[-1] == 3 and k.ndim >= 1:
            u2 = np.sum((k * self.lam) ** 2, axis=-1)
        else:
            u2 = k ** 2
        s2, d = self.sigma2, self.dim
        amp = np.prod(self.lam[:d])
        if self.kind == "gaussian":
            return s2 * amp / np.pi ** d * np.exp(-u2 / np.pi)
        if self.kind == "exponential":
            e = 0.5 * (d + 1.0)
            return s2 * amp * gamma_fn(e) / (np.pi * (1.0 + u2)) ** e
        # matern
        nu = self.nu
        return (s2 * amp * gamma_fn(nu + 0.5 * d) * (2.0 * nu) ** nu
                / (gamma_fn(nu) * np.pi ** (0.5 * d)
                   * (2.0 * nu + u2) ** (nu + 0.5 * d)))

    def __repr__(self):
        extra = f", nu={self.nu}" if self.kind == "matern" else ""
        return (f"CovarianceModel({self.kind!r}, sigma2={self.sigma2}, "
                f"lam={tuple(self.lam)}{extra}, dim={self.dim})")


def variogram(model, r):
    return model.variogram(r)


def spectrum(model, k):
    return model.spectrum(k)
