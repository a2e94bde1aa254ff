"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from .grid import ChordState, GridError, GridSpec
from .model import ModelParams, check_params

__all__ = ["check_state", "check_model_params", "check_energy_series"]


def check_state(state, grid: GridSpec | None = None) -> ChordState:
    """Raise unless ``state`` is a finite :class:`ChordState`, optionally on ``grid``."""
    if not isinstance(state, ChordState):
        raise TypeError(f"expected a ChordState, got {type(state).__name__}")
    if grid is not None and state.grid != grid:
        raise GridError(f"state grid {state.grid} differs from fitted grid {grid}")
    if not np.all(np.isfinite(state.values)):
        raise ValueError("chord values contain NaN or inf")
    return state


def check_model_params(params) -> ModelParams:
    if not isinstance(params, ModelParams):
        raise TypeError(f"expected ModelParams, got {type(params).__name__}")
    return check_params(params)


def check_energy_series(series) -> np.ndarray:
    """``series`` as a float array of shape ``(n, 2)`` holding ``(E_minus, E_plus)`` rows."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) array of (E_minus, E_plus), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("energy series contains NaN or inf")
    return arr
