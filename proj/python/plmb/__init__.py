"""Possibility labeled multi-Bernoulli filtering and multi-sensor fusion."""

from ._plmb import *  # noqa: F401,F403
from ._plmb import PlmbError, __doc__  # noqa: F401

__version__ = "0.1.0"
