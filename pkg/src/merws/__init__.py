"""Simulation laboratory for the multidimensional elephant random walk with stops."""

from .errors import MerwsError
from .model import ModelParams, Regime, derive_params, params_for_regime

__version__ = "0.1.0"

__all__ = ["MerwsError", "ModelParams", "Regime", "derive_params", "params_for_regime", "__version__"]
