"""Gaussian random field synthesis by explicit spectral summation.

The field is a finite sum over a deterministic frequency lattice,

    Z(x) = sum_j w_j [ cos(2 pi a_j . x) W_j + sin(2 pi a_j . x) W'_j ],

with w_j = sqrt(S density mass of the lattice cell) and (W_j, W'_j)
independent standard normals.  Because the sum is evaluated directly at
arbitrary points (no FFT), the same seed reproduces the same realization
at any mesh resolution over the same domain.

Frequency lattice: the first active axis carries non-negative multiples
m / L_ext with a sqrt(2) weight on m > 0 (its mirror image is folded in);
the remaining active axes carry a symmetric signed range.  For
non-periodic fields the spectral period L_ext is the domain length
stretched by ``eta`` (default 2), which adds the sub-domain wavenumbers
that break periodicity.

The Gaussian draws come from a counter-based Philox generator keyed by
the seed alone, mapped through Box-Muller in lattice order, so streams
can be reproduced outside numpy as well.
"""

import warnings

import numpy as np

from .._kernels import spectral_sum
from ..mesh import Field
from .covariance import CovarianceError

TWO_PI = 2.0 * np.pi


class SpectralSampler:
    """Frozen spectral representation of one GRF realization."""

    def __init__(self, model, freqs, weights, seed, lengths, origin,
                 periodic, eta, nfreq):
        self.model = model
        self.freqs = np.ascontiguousarray(freqs)
        self.seed = int(seed)
        self.lengths = lengths
        self.origin = origin
        self.periodic = periodic
        self.eta = eta
        self.nfreq = nfreq
        # exact variance normalization: sum w_j^2 == sigma2
        wsq = np.sum(weights ** 2)
        if wsq > 0.0:
            weights = weights * np.sqrt(model.sigma2 / wsq)
        self.weights = weights
        self.W, self.Wp = _draw_normals(self.seed, len(weights))

    @property
    def n_freq(self):
        return len(self.weights)

    def evaluate(self, points):
        """Evaluate the realization at arbitrary points (n, 3)."""
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        amp_cos = np.ascontiguousarray(self.weights * self.W)
        amp_sin = np.ascontiguousarray(self.weights * self.Wp)
        return spectral_sum(points, self.freqs, amp_cos, amp_sin)


def _draw_normals(seed, n):
    """Philox-keyed Box-Muller pairs, one (W, W') pair per frequency."""
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = gen.random((2, n))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))   # 1 - u in (0, 1]
    angle = TWO_PI * u[1]
    return radius * np.cos(angle), radius * np.sin(angle)


def _axis_multiples(n, signed):
    if n <= 1:
        return np.zeros(1)
    if not signed:
        return np.arange(n, dtype=float)
    return np.arange(-((n - 1) // 2), n // 2 + 1, dtype=float)


def sample_frequencies(model, mesh, nfreq, periodic=False, eta=2.0, seed=0):
    """Build the deterministic frequency lattice for a mesh's domain.

    ``nfreq`` gives the per-axis counts; axes with a single frequency (or
    collapsed mesh directions) contribute only the zero frequency.
    """
    nfreq = tuple(int(v) for v in np.broadcast_to(nfreq, (3,)))
    if any(v < 1 for v in nfreq):
        raise CovarianceError(f"nfreq must be >= 1 per axis, got {nfreq}")
    if eta <= 1.0 and not periodic:
        raise CovarianceError(f"eta must be > 1 for non-periodic fields, "
                              f"got {eta}")
    l_ext = mesh.lengths * (1.0 if periodic else eta)
    active = [ax for ax in range(3) if nfreq[ax] > 1 and mesh.n[ax] > 1]
    for ax in active:
        need = 2.0 * l_ext[ax] / model.lam[ax]
        if nfreq[ax] < need:
            warnings.warn(
                f"nfreq[{ax}]={nfreq[ax]} gives fewer than 2 frequencies "
                f"per correlation length (need >= {need:.0f}); the field "
                f"will be under-resolved", stacklevel=2)

    if active and model.dim != len(active):
        warnings.warn(f"model.dim={model.dim} but {len(active)} active "
                      f"axes; spectral shape will be inconsistent",
                      stacklevel=2)

    axes = []
    half_axis = active[0] if active else 0
    for ax in range(3):
        if ax in active:
            mult = _axis_multiples(nfreq[ax], signed=(ax != half_axis))
            axes.append(mult / l_ext[ax])
        else:
            axes.append(np.zeros(1))
    A0, A1, A2 = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
    freqs = np.stack([A0.ravel(), A1.ravel(), A2.ravel()], axis=-1)

    d = max(len(active), 1)
    da = np.prod([1.0 / l_ext[ax] for ax in active]) if active else 1.0
    dens = model.spectrum(TWO_PI * freqs)          # density in angular k
    mass = dens * (TWO_PI ** d) * da               # cell mass in a-space
    w = np.sqrt(np.maximum(mass, 0.0))
    if active:
        w = np.where(freqs[:, half_axis] > 0.0, np.sqrt(2.0) * w, w)
    return SpectralSampler(model, freqs, w, seed, mesh.lengths.copy(),
                           mesh.origin.copy(), periodic, eta, nfreq)


def generate_grf(sampler, mesh, name="grf"):
    """Evaluate the sampler's realization at every cell center."""
    z = sampler.evaluate(mesh.cell_centers)
    return Field(mesh, z, "scalar", name)


def scale_field(z, mean, sigma, lognormal=False):
    """Affine (or log-affine) map of a unit-marginal GRF.

    ``z`` must already be normalized to a standard-normal marginal; the
    result is mean + sigma * z, exponentiated when ``lognormal``.
    """
    if isinstance(z, Field):
        out = mean + sigma * z.values
        if lognormal:
            out = np.exp(out)
        return Field(z.mesh, out, "scalar", z.name)
    out = mean + sigma * np.asarray(z, dtype=float)
    return np.exp(out) if lognormal else out
