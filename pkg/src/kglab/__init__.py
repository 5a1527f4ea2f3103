"""Exact Gaussian sampling and path-regularity experiments for the damped
stochastic Klein-Gordon equation driven by space-time white noise in 1+1
dimensions."""

__version__ = "0.1.0"

from .kernels import (  # noqa: F401
    ModelParams,
    Regime,
    critical_kernel,
    fourier_green,
    spacetime_transform,
)
from .covariance import (  # noqa: F401
    CharCoords,
    SpaceTimePoint,
    cov_critical,
    cov_spectral,
    covariance_matrix,
)
