"""Vine-copula dependence analysis for mixed-type tabular data."""
from .errors import DataError, NumericError, VineDepError

__version__ = "0.1.0"

__all__ = ["DataError", "NumericError", "VineDepError", "__version__"]
