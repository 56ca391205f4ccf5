"""Evaluation, anchor clustering and class-rebalancing tools for
spatiotemporal action detection."""

from actdet.errors import InputError

__version__ = "0.1.0"

__all__ = ["InputError", "__version__"]
