"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

from typing import Iterable

import numpy as np
import pandas as pd

from garchnn.exceptions import DataError
from garchnn.timeseries import ReturnSeries

__all__ = ["check_returns", "check_horizons", "check_positive_int", "check_ratios"]


def check_returns(X, min_length: int = 2) -> np.ndarray:
    """Return a finite 1-d float array of shocks.

    Accepts a :class:`ReturnSeries`, a pandas Series/DataFrame with one
    column, or anything array-like of shape ``(n,)`` or ``(n, 1)``.

    Raises
    ------
    DataError
        Wrong shape, non-finite entries or fewer than ``min_length`` values.
    """
    if isinstance(X, ReturnSeries):
        arr = X.returns
    elif isinstance(X, (pd.Series, pd.DataFrame)):
        arr = X.to_numpy()
    else:
        arr = X
    try:
        arr = np.asarray(arr, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"returns must be numeric: {exc}") from exc
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DataError(f"expected a single return series, got shape {arr.shape}")
    if arr.size < min_length:
        raise DataError(f"need at least {min_length} returns, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise DataError(f"non-finite return at index {bad}")
    return arr


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_horizons(horizons: Iterable[int]) -> tuple[int, ...]:
    out = tuple(check_positive_int(h, "horizon") for h in horizons)
    if not out:
        raise ValueError("at least one horizon is required")
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate horizons in {out}")
    return out


def check_ratios(ratios) -> tuple[float, float, float]:
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x <= 0 for x in r):
        raise ValueError(f"split ratios must be three positive numbers, got {ratios!r}")
    return r
