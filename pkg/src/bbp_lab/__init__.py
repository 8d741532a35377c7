"""Deformed inhomogeneous random matrix laboratory.

Construction and sampling of profile-damped Wigner matrices with low-rank
shifts, statistical verification of the outlier location/fluctuation laws
and spectral-measure limits, and exact surface-graph combinatorics with
brute-force oracles.
"""

from . import combinatorics, ensemble, fluctuation, profile, spectral, wick

__all__ = ["combinatorics", "ensemble", "fluctuation", "profile", "spectral", "wick"]

__version__ = "0.1.0"
