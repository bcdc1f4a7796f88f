"""encommons.reporting

File output for metrics and sweep tables.
"""

from .export import to_csv, to_json

__all__ = ["to_csv", "to_json"]
