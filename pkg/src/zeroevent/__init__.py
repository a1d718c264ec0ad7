"""Zero- and few-example video event detection over semantic concept scores."""

from .errors import (ConfigError, DataError, NonConvergence, ZeroEventError)

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "NonConvergence", "ZeroEventError", "__version__"]
