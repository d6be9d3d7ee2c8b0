import numpy as np

from geofv._kernels import BACKEND, spectral_sum, spectral_sum_numpy


def _data(rng, n_pts=200, n_freq=700):
    pts = rng.random((n_pts, 3))
    freqs = rng.normal(size=(n_freq, 3))
    a = rng.normal(size=n_freq)
    b = rng.normal(size=n_freq)
    return pts, freqs, a, b


def test_fallback_matches_direct_sum(rng):
    pts, freqs, a, b = _data(rng, n_pts=40, n_freq=600)  # spans two chunks
    theta = 2.0 * np.pi * pts @ freqs.T
    direct = np.cos(theta) @ a + np.sin(theta) @ b
    out = spectral_sum_numpy(pts, freqs, a, b)
    assert np.allclose(out, direct, rtol=1e-12, atol=1e-12)


def test_backends_agree(rng):
    pts, freqs, a, b = _data(rng)
    z1 = spectral_sum(pts, freqs, a, b)
    z2 = spectral_sum_numpy(pts, freqs, a, b)
    scale = np.max(np.abs(z2))
    assert np.max(np.abs(z1 - z2)) < 1e-12 * scale


def test_backend_identifier():
    assert BACKEND in ("cython", "numpy")


def test_empty_frequencies(rng):
    pts = rng.random((5, 3))
    out = spectral_sum_numpy(pts, np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    assert np.allclose(out, 0.0)
