"""Numerical laboratory for conditionality of bases in Banach spaces.

Weighted Fourier systems in power-weight Hilbert spaces, sequence spaces,
exact and witness conditionality constants, and exponent fits.
"""
__version__ = "0.1.0"

from .errors import (BlockOverrun, BudgetExceeded, CondlabError, DimensionMismatch,
                     IncompatibleOracles, InsufficientData, InvalidExponent, InvalidParameter,
                     NoConvergence, NotPositiveDefinite, OddDimension, UnsupportedPair)
from .series import GrowthSeries, Kind

__all__ = [
    "BlockOverrun", "BudgetExceeded", "CondlabError", "DimensionMismatch", "IncompatibleOracles",
    "InsufficientData", "InvalidExponent", "InvalidParameter", "NoConvergence",
    "NotPositiveDefinite", "OddDimension", "UnsupportedPair", "GrowthSeries", "Kind",
]
