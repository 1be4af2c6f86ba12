"""Risk-sensitive growth-optimal allocation on the unit simplex."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
