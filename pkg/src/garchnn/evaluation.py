"""
Forecast accuracy and Value-at-Risk backtests.

Accuracy is measured on volatilities: square roots of the forecast and
realized variances.  VaR limits are symmetric bands ``+/- multiplier *
sigma_hat`` around a zero mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from garchnn.exceptions import DataError
from garchnn.timeseries import VolSeries

__all__ = [
    "VAR_MULTIPLIER",
    "ForecastSeries",
    "MetricReport",
    "VarReport",
    "realized_forecast",
    "evaluate",
    "var_limits",
    "var_violations",
    "var_trace",
    "tail_mass",
]

VAR_MULTIPLIER = 1.65


def realized_forecast(daily, known, k: int) -> np.ndarray:
    """Aggregate daily variance forecasts into a realized-variance forecast.

    Parameters
    ----------
    daily : array_like, shape (n, h)
        ``sigma^2_{t+1..t+h | t}`` per anchor.
    known : array_like, shape (n,)
        Squared shocks already observed inside the target window.
    k : int
        Realized-volatility window length.

    Returns
    -------
    ndarray
        ``known + sum of the last min(h, k) daily forecasts``.
    """
    daily = np.atleast_2d(np.asarray(daily, dtype=float))
    m = min(daily.shape[1], int(k))
    return np.asarray(known, dtype=float) + daily[:, -m:].sum(axis=1)


@dataclass(frozen=True)
class ForecastSeries:
    """Realized-variance forecasts issued at a sequence of anchors.

    ``sigma_hat_sq[r]`` forecasts the realized variance ending at return
    index ``anchors[r] + horizon``.
    """

    anchors: np.ndarray
    timestamps: np.ndarray
    sigma_hat_sq: np.ndarray
    horizon: int
    model: str = "model"

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=int)
        s = np.asarray(self.sigma_hat_sq, dtype=float)
        ts = np.asarray(self.timestamps)
        if not (anchors.shape == s.shape == ts.shape) or anchors.ndim != 1:
            raise ValueError("anchors, timestamps and forecasts must be aligned 1-d arrays")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("forecasts must be finite and positive")
        if int(self.horizon) < 1:
            raise ValueError("horizon must be >= 1")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "sigma_hat_sq", s)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "horizon", int(self.horizon))

    def __len__(self) -> int:
        return self.anchors.size

    @property
    def sigma_hat(self) -> np.ndarray:
        return np.sqrt(self.sigma_hat_sq)

    @property
    def target_index(self) -> np.ndarray:
        return self.anchors + self.horizon

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"anchor": self.anchors, "date": self.timestamps, "sigma_hat_sq": self.sigma_hat_sq}
        )


@dataclass
class MetricReport:
    """MAE/MSE rows keyed by ``(model, horizon)``."""

    rows: list = field(default_factory=list)
    scale: str = "sigma"

    def add(self, model: str, horizon: int, mae: float, mse: float, n: int) -> None:
        self.rows.append((model, int(horizon), float(mae), float(mse), int(n)))

    def extend(self, other: "MetricReport") -> "MetricReport":
        if other.scale != self.scale:
            raise ValueError("cannot merge reports on different scales")
        self.rows.extend(other.rows)
        return self

    def lookup(self, model: str, horizon: int) -> tuple[float, float]:
        for m, h, mae, mse, _ in self.rows:
            if m == model and h == horizon:
                return mae, mse
        raise KeyError((model, horizon))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["model", "horizon", "mae", "mse", "n"])


def evaluate(forecasts: ForecastSeries, truth: VolSeries, scale: str = "sigma") -> MetricReport:
    """MAE and MSE between forecast and realized volatility.

    Parameters
    ----------
    forecasts : ForecastSeries
    truth : VolSeries
        Realized volatility; aligned on return index.
    scale : {'sigma', 'variance'}
        Compare square roots (default) or the variances themselves.

    Returns
    -------
    MetricReport
        A single row for ``(forecasts.model, forecasts.horizon)``.

    Examples
    --------
    >>> import numpy as np
    >>> v = VolSeries(np.arange(4), np.array([1.0, 2.0, 3.0, 4.0]), k=1)
    >>> f = ForecastSeries(np.array([0, 1]), np.array([0, 1]), np.array([4.0, 16.0]), 1)
    >>> evaluate(f, v).rows[0][2:4]
    (0.5, 0.5)
    """
    if scale not in ("sigma", "variance"):
        raise ValueError(f"scale must be 'sigma' or 'variance', got {scale!r}")
    idx = forecasts.target_index - truth.offset
    ok = (idx >= 0) & (idx < len(truth))
    if not ok.any():
        raise DataError("no forecast aligns with the realized volatility series")
    if scale == "sigma":
        pred, actual = forecasts.sigma_hat[ok], truth.sigma[idx[ok]]
    else:
        pred, actual = forecasts.sigma_hat_sq[ok], truth.sigma_sq[idx[ok]]
    err = pred - actual
    report = MetricReport(scale=scale)
    report.add(forecasts.model, forecasts.horizon, np.mean(np.abs(err)), np.mean(err**2), int(ok.sum()))
    return report


def var_limits(sigma_hat, multiplier: float = VAR_MULTIPLIER) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric VaR band ``(+m sigma_hat, -m sigma_hat)``."""
    s = np.asarray(sigma_hat, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValueError("sigma_hat must be finite and non-negative")
    if multiplier < 0:
        raise ValueError("multiplier must be non-negative")
    upper = multiplier * s
    return upper, -upper


@dataclass(frozen=True)
class VarReport:
    level: float
    multiplier: float
    upper_rate: float
    lower_rate: float
    total_rate: float
    upper_count: int
    lower_count: int
    n: int

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "multiplier": self.multiplier,
            "upper_rate": self.upper_rate,
            "lower_rate": self.lower_rate,
            "total_rate": self.total_rate,
            "upper_count": self.upper_count,
            "lower_count": self.lower_count,
            "n": self.n,
        }


def var_violations(returns, limits, multiplier: float = VAR_MULTIPLIER) -> VarReport:
    """Count returns outside the VaR band.

    Parameters
    ----------
    returns : array_like
        Realized returns over the backtest period.
    limits : tuple of array_like
        ``(upper, lower)`` from :func:`var_limits`.
    multiplier : float
        Recorded in the report together with the nominal one-sided level
        ``Phi(-multiplier)``.
    """
    r = np.asarray(returns, dtype=float)
    upper, lower = (np.asarray(x, dtype=float) for x in limits)
    if not (r.shape == upper.shape == lower.shape):
        raise ValueError("returns and limits must be aligned")
    n = r.size
    if n == 0:
        raise ValueError("empty backtest")
    up = int(np.sum(r > upper))
    lo = int(np.sum(r < lower))
    return VarReport(
        level=float(stats.norm.cdf(-multiplier)),
        multiplier=float(multiplier),
        upper_rate=up / n,
        lower_rate=lo / n,
        total_rate=(up + lo) / n,
        upper_count=up,
        lower_count=lo,
        n=n,
    )


def var_trace(timestamps, returns, limits) -> pd.DataFrame:
    """Per-day VaR trace: date, return, upper, lower, breach flag."""
    upper, lower = limits
    r = np.asarray(returns, dtype=float)
    breach = (r > upper).astype(int) - (r < lower).astype(int)
    return pd.DataFrame(
        {"date": np.asarray(timestamps), "return": r, "upper": upper, "lower": lower, "breach": breach}
    )


def tail_mass(multiplier: float = VAR_MULTIPLIER, dist: str = "normal", dof: float | None = None) -> float:
    """Two-sided probability that a unit-variance shock leaves ``+/- multiplier``."""
    if dist == "normal":
        return float(2.0 * stats.norm.cdf(-multiplier))
    if dist == "t":
        if dof is None or not dof > 2:
            raise ValueError("Student-t tail mass needs dof > 2")
        return float(2.0 * stats.t.cdf(-multiplier * math.sqrt(dof / (dof - 2.0)), dof))
    raise ValueError(f"unknown distribution {dist!r}")
