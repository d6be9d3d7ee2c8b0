"""Pure-numpy spectral-sum kernel, used when the compiled extension is absent.

Chunked over frequencies to bound the size of the phase temporaries.
"""

import numpy as np

_CHUNK = 512


def spectral_sum(points, freqs, amp_cos, amp_sin):
    points = np.ascontiguousarray(points, dtype=float)
    z = np.zeros(points.shape[0])
    for j0 in range(0, freqs.shape[0], _CHUNK):
        f = freqs[j0:j0 + _CHUNK]
        theta = (2.0 * np.pi) * (points @ f.T)
        z += np.cos(theta) @ amp_cos[j0:j0 + _CHUNK]
        z += np.sin(theta) @ amp_sin[j0:j0 + _CHUNK]
    return z
