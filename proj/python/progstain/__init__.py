"""Stain-aware losses, pixel refinement and metrics for virtual IHC staining."""

from ._progstain import *  # noqa: F401,F403
from ._progstain import ConfigError, DivergenceError, InvalidArgument

__all__ = [name for name in dir() if not name.startswith("_")]
