"""Volatility forecasting from OHLC bars and search-volume trends."""

from volcast.kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
