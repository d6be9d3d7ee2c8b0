"""Hot numerical kernels with a compiled core and a numpy fallback.

``spectral_sum`` is rebound to the Cython implementation when the extension
built; ``spectral_sum_numpy`` is always the pure-Python version so the two
can be compared (see benchmarks/bench_spectral.py).
"""

from ._fallback import spectral_sum as spectral_sum_numpy

try:
    from ._spectral import spectral_sum

    BACKEND = "cython"
except ImportError:  # extension not built
    spectral_sum = spectral_sum_numpy
    BACKEND = "numpy"

__all__ = ["spectral_sum", "spectral_sum_numpy", "BACKEND"]
