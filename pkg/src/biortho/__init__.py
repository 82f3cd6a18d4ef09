"""Phase-transition thresholds for l1 recovery with bi-orthogonal dictionaries."""

__version__ = "0.1.0"
