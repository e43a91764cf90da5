"""Geodesic rays on toric varieties: Bergman approximants, Legendre limits and rate functions."""

__version__ = "0.1.0"

from .polytope import *  # noqa: F401,F403
from .plconvex import *  # noqa: F401,F403
from .potentials import *  # noqa: F401,F403
from .bergman import *  # noqa: F401,F403
from .geodesic import *  # noqa: F401,F403
from .ldp import *  # noqa: F401,F403
from . import polytope, plconvex, potentials, bergman, geodesic, ldp  # noqa: F401
