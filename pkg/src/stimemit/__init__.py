"""Stimulated emission of a single atom by a single photon in a 1D waveguide.

Modules:
    core: parameters, grids, the incident pulse and the exception types.
    analytic: closed-form populations, lifetimes and photon correlations.
    numeric: space-time solver for the amplitude and the photon pair.
    twochannel: transmitting waveguide and lambda atom, cloning figures.
    cli: command-line front end (``stimemit``).
"""
__version__ = "0.1.0"

from .core import (ConfigurationError, DomainTooSmallError, Grid1D, InconsistencyError,
                   InvalidParameterError, PhysParams, PrematureReadoutError, Pulse,
                   ResourceError, SingularPointError, StimError, make_exponential_pulse,
                   nondimensionalize)

__all__ = [
    "__version__",
    "ConfigurationError",
    "DomainTooSmallError",
    "Grid1D",
    "InconsistencyError",
    "InvalidParameterError",
    "PhysParams",
    "PrematureReadoutError",
    "Pulse",
    "ResourceError",
    "SingularPointError",
    "StimError",
    "make_exponential_pulse",
    "nondimensionalize",
]
