"""Negative face recognition: complementary templates for soft-biometric privacy."""

from ._nfr import *  # noqa: F401,F403
from ._nfr import __doc__  # noqa: F401

__version__ = "0.1.0"
