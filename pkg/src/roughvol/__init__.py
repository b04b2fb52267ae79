"""Range-based volatility toolkit: proxies, roughness measurement, RFSV
simulation and forecasting."""

from ._kernels import BACKEND as KERNEL_BACKEND
from . import fbm, forecast, market_data, proxies, scaling, simulate

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    "fbm",
    "forecast",
    "market_data",
    "proxies",
    "scaling",
    "simulate",
]
