"""Bounds and capacity results for the two-user Gaussian ergodic fading interference channel."""

from .ensemble import *  # noqa: F401,F403
from .bounds import *  # noqa: F401,F403
from .geometry import *  # noqa: F401,F403
from .policies import *  # noqa: F401,F403
from .theorems import *  # noqa: F401,F403

__version__ = "0.1.0"
