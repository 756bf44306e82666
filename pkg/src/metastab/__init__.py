"""Capacities, transition times and saddle networks of gradient diffusions at small noise."""

__version__ = "0.1.0"

from .scaled import ScaledValue  # noqa: E402
from .errors import MetastabError  # noqa: E402

__all__ = ["ScaledValue", "MetastabError", "__version__"]
