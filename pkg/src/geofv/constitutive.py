"""Fluid property laws rho(c), mu(c) and the hydrodynamic dispersion tensor."""

import logging

import numpy as np

log = logging.getLogger(__name__)

PROPERTY_MODELS = ("constant", "linear", "exponential", "tabulated")


class ConstitutiveError(ValueError):
    pass


class FluidPropertyModel:
    """One fluid property as a function of concentration (or temperature).

    kinds: constant f0; linear f0 + slope*c; exponential f0*exp(R*c);
    tabulated piecewise-linear (c, f) with clamped, warned extrapolation.
    """

    def __init__(self, kind, f0=None, slope=0.0, exponent=0.0, table=None):
        if kind not in PROPERTY_MODELS:
            raise ConstitutiveError(f"unknown property model {kind!r}; "
                                    f"expected one of {PROPERTY_MODELS}")
        self.kind = kind
        self.f0 = None if f0 is None else float(f0)
        self.slope = float(slope)
        self.exponent = float(exponent)
        self.table = None
        if kind == "tabulated":
            table = np.asarray(table, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
                raise ConstitutiveError("tabulated model needs >= 2 (c, f) "
                                        "rows")
            if np.any(np.diff(table[:, 0]) <= 0.0):
                raise ConstitutiveError("tabulated c values must be strictly "
                                        "ascending")
            self.table = table
        elif self.f0 is None:
            raise ConstitutiveError(f"{kind} model needs f0")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        if self.kind == "constant":
            out = np.full_like(c, self.f0)
        elif self.kind == "linear":
            out = self.f0 + self.slope * c
        elif self.kind == "exponential":
            out = self.f0 * np.exp(self.exponent * c)
        else:
            cs, fs = self.table[:, 0], self.table[:, 1]
            if np.any(c < cs[0]) or np.any(c > cs[-1]):
                log.warning("tabulated property clamped outside "
                            "[%g, %g]", cs[0], cs[-1])
            out = np.interp(c, cs, fs)
        return out if out.shape else float(out)


def evaluate_property(model, c):
    return model(c)


class DispersionParameters:
    """Molecular diffusion and dispersivities (uniform or per-cell)."""

    def __init__(self, Dm=0.0, alphaL=0.0, alphaT=0.0):
        self.Dm = np.asarray(Dm, dtype=float)
        self.alphaL = np.asarray(alphaL, dtype=float)
        self.alphaT = np.asarray(alphaT, dtype=float)
        if np.any(self.Dm < 0) or np.any(self.alphaL < 0) \
                or np.any(self.alphaT < 0):
            raise ConstitutiveError("Dm and dispersivities must be >= 0")
        if np.any(self.alphaT > self.alphaL):
            log.warning("alphaT > alphaL is physically unusual")


V_EPS = 1e-14  # below this speed the velocity-dependent terms are dropped


def dispersion_tensor(v, params):
    """Full symmetric dispersion tensor for velocities v (shape (..., 3)).

    Returns components (..., 6) ordered xx, yy, zz, xy, xz, yz.  The
    ||v|| -> 0 singularity of the outer-product term is removable; below
    V_EPS the tensor is exactly Dm * I.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    speed = np.linalg.norm(v, axis=-1)
    out = np.zeros(v.shape[:-1] + (6,))
    iso = params.Dm + params.alphaT * speed
    out[..., 0] = iso
    out[..., 1] = iso
    out[..., 2] = iso
    moving = speed > V_EPS
    if np.any(moving):
        coef = np.where(moving,
                        (params.alphaL - params.alphaT)
                        / np.where(moving, speed, 1.0), 0.0)
        out[..., 0] += coef * v[..., 0] * v[..., 0]
        out[..., 1] += coef * v[..., 1] * v[..., 1]
        out[..., 2] += coef * v[..., 2] * v[..., 2]
        out[..., 3] += coef * v[..., 0] * v[..., 1]
        out[..., 4] += coef * v[..., 0] * v[..., 2]
        out[..., 5] += coef * v[..., 1] * v[..., 2]
    return out[0] if single else out
