from .covariance import (CovarianceError, CovarianceModel,
                         UnsupportedSpectrumError, spectrum, variogram)
from .grf import (SpectralSampler, generate_grf, sample_frequencies,
                  scale_field)
from .truncation import TruncationRule, bitruncate, facies_proportion, truncate
from .variogram import empirical_variogram

__all__ = [
    "CovarianceError", "CovarianceModel", "UnsupportedSpectrumError",
    "spectrum", "variogram", "SpectralSampler", "generate_grf",
    "sample_frequencies", "scale_field", "TruncationRule", "bitruncate",
    "facies_proportion", "truncate", "empirical_variogram",
]
