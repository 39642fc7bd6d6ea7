"""mstdyn: dynamics of rolling-correlation minimal spanning trees.

The package scans a log-return panel with a sliding window, builds one
correlation-distance MST per window, and studies the resulting tree movie
three ways: structural observables per frame (occupation layer, handshake
distances, degree entropy, betweenness, rank tracking), empirical
degree-transition kinetics with a detailed-balance kernel and its Markov
simulator, and closed-form phase laws (power-law nucleation growth plus
the two-sided logarithmic peak) with their estimators. Synthetic
generators replace proprietary market data in all tests.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    DimensionError,
    FitError,
    KernelError,
    MstdynError,
    ParseError,
)
