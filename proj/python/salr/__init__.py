"""Sparse weights with low-rank adapters."""

from . import _salr
from ._salr import *  # noqa: F401,F403

__all__ = [name for name in dir(_salr) if not name.startswith("_")]
