"""Capacitated facility location by annealed control-barrier flows."""

from ._flpflow import *  # noqa: F401,F403
from ._flpflow import __doc__  # noqa: F401
