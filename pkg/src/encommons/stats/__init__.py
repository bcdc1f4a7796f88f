"""encommons.stats

Statistical helpers for the simulation and identifier checks: power-law fits for the
participation sweep, byte uniformity for identifiers, false-positive bounds.
"""

from .regression import LogLogFit, loglog_slope, loglog_summary
from .tests import ChiSquareResult, binomial_upper_bound, byte_histogram, byte_uniformity

__all__ = [
    "LogLogFit",
    "loglog_slope",
    "loglog_summary",
    "ChiSquareResult",
    "byte_histogram",
    "byte_uniformity",
    "binomial_upper_bound",
]
