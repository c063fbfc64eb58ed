"""Ranked set sampling estimators of the study-variate mean under the
Morgenstern-type bivariate generalized exponential distribution."""

__version__ = "0.1.0"

from .model import ModelParams  # noqa: E402
from .schemes import RankedSample, SchemeSpec, draw, draw_direct  # noqa: E402

__all__ = ["ModelParams", "RankedSample", "SchemeSpec", "__version__", "draw", "draw_direct"]
