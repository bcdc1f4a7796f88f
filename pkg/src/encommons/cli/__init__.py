"""encommons.cli

Command-line entry point (``en-commons``) and the bandwidth estimator.
"""

from .estimate import BandwidthEstimate, estimate_bandwidth
from .main import build_parser, main

__all__ = ["main", "build_parser", "BandwidthEstimate", "estimate_bandwidth"]
