"""
Price ingestion and construction of the supervised volatility dataset.

Pipeline: close prices -> scaled log returns -> k-day realized volatility ->
windowed records ``[(eps_{t-k+1}, ..., eps_t), sigma^2_{t+h}]`` -> contiguous
train/validation/test partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from garchnn.exceptions import DataError

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "VolSeries",
    "WindowedDataset",
    "SplitDataset",
    "load_prices",
    "log_returns",
    "realized_volatility",
    "build_dataset",
    "split",
    "write_dataset",
    "read_dataset",
]

DEFAULT_SCALE = 100.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _default_dates(n: int) -> np.ndarray:
    return np.arange(n).astype("datetime64[D]")


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[D]")
        closes = np.asarray(self.closes, dtype=float)
        if ts.shape != closes.shape or closes.ndim != 1:
            raise DataError("timestamps and closes must be 1-D and equally long")
        if closes.size < 2:
            raise DataError("a price series needs at least 2 observations")
        if not np.all(np.isfinite(closes)):
            raise DataError("missing or non-finite price")
        if np.any(closes <= 0):
            bad = int(np.flatnonzero(closes <= 0)[0])
            raise DataError(f"non-positive price at row {bad}: {closes[bad]}")
        if np.any(np.diff(ts) <= np.timedelta64(0, "D")):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "closes", _frozen(closes))

    def __len__(self) -> int:
        return self.closes.size


@dataclass(frozen=True)
class ReturnSeries:
    """Scaled log returns; ``returns[i]`` is dated ``timestamps[i]``."""

    timestamps: np.ndarray
    returns: np.ndarray
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        ts = self.timestamps
        ts = _default_dates(r.size) if ts is None else np.asarray(ts, dtype="datetime64[D]")
        if r.ndim != 1 or ts.shape != r.shape:
            raise DataError("timestamps and returns must be 1-D and equally long")
        if not np.all(np.isfinite(r)):
            raise DataError("returns contain non-finite values")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "returns", _frozen(r))

    @classmethod
    def from_array(cls, returns, scale: float = DEFAULT_SCALE) -> "ReturnSeries":
        return cls(None, returns, scale)

    def __len__(self) -> int:
        return self.returns.size


@dataclass(frozen=True)
class VolSeries:
    """Realized volatility, defined from index ``k - 1`` of the return series.

    ``sigma[i]`` belongs to return index ``offset + i`` where ``offset = k - 1``.
    """

    timestamps: np.ndarray
    sigma: np.ndarray
    k: int

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if np.any(sigma < 0):
            raise DataError("realized volatility must be non-negative")
        object.__setattr__(self, "timestamps", _frozen(self.timestamps))
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def sigma_sq(self) -> np.ndarray:
        return self.sigma**2

    @property
    def offset(self) -> int:
        return self.k - 1

    def __len__(self) -> int:
        return self.sigma.size

    def at(self, index) -> np.ndarray:
        """Realized variance at return indices ``index``."""
        return self.sigma_sq[np.asarray(index) - self.offset]


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised records ``(window, target, anchor)``.

    ``windows[r]`` holds ``eps[anchor-k+1 : anchor+1]`` and ``targets[r]`` the
    realized variance at ``anchor + h``.  ``returns`` is the source series the
    indices refer to.
    """

    windows: np.ndarray
    targets: np.ndarray
    anchors: np.ndarray
    k: int
    h: int
    returns: ReturnSeries = field(repr=False)

    def __len__(self) -> int:
        return self.anchors.size

    @property
    def timestamps(self) -> np.ndarray:
        return self.returns.timestamps[self.anchors]

    def subset(self, start: int, stop: int) -> "WindowedDataset":
        return WindowedDataset(
            self.windows[start:stop],
            self.targets[start:stop],
            self.anchors[start:stop],
            self.k,
            self.h,
            self.returns,
        )


@dataclass(frozen=True)
class SplitDataset:
    train: WindowedDataset
    val: WindowedDataset
    test: WindowedDataset

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    @property
    def returns(self) -> ReturnSeries:
        return self.train.returns


def load_prices(
    path: str | Path,
    column_map: Mapping[str, str] | None = None,
    delimiter: str | None = None,
) -> PriceSeries:
    """Read a delimited price table.

    Parameters
    ----------
    path : str or Path
        Text table with a header row.
    column_map : mapping, optional
        ``{"date": <date column>, "close": <close column>}``.  Defaults to
        ``date`` and ``close`` (matched case-insensitively).
    delimiter : str, optional
        Field separator; sniffed from the file when omitted.

    Returns
    -------
    PriceSeries
        Rows sorted by date.

    Raises
    ------
    DataError
        Missing columns, unparseable values, duplicate dates or
        non-positive prices.
    """
    cmap = {"date": "date", "close": "close"}
    if column_map:
        cmap.update(column_map)
    try:
        frame = pd.read_csv(path, sep=delimiter, engine="python", dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read price file {path}: {exc}") from exc
    lower = {c.strip().lower(): c for c in frame.columns}
    cols = {}
    for role, name in cmap.items():
        col = name if name in frame.columns else lower.get(name.strip().lower())
        if col is None:
            raise DataError(f"missing {role} column {name!r} in {path}")
        cols[role] = col

    raw_dates = frame[cols["date"]].str.strip()
    raw_close = frame[cols["close"]].str.strip()
    if raw_dates.isna().any() or (raw_dates == "").any():
        raise DataError("missing date value")
    if raw_close.isna().any() or (raw_close == "").any():
        bad = int(np.flatnonzero((raw_close.isna() | (raw_close == "")).to_numpy())[0])
        raise DataError(f"missing close price at row {bad}")
    try:
        dates = pd.to_datetime(raw_dates, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable date: {exc}") from exc
    try:
        closes = raw_close.astype(float).to_numpy()
    except ValueError as exc:
        raise DataError(f"unparseable close price: {exc}") from exc
    if not np.all(np.isfinite(closes)):
        raise DataError("missing or non-finite close price")
    if np.any(closes <= 0):
        bad = int(np.flatnonzero(closes <= 0)[0])
        raise DataError(f"non-positive price at row {bad}: {closes[bad]}")

    days = dates.to_numpy().astype("datetime64[D]")
    order = np.argsort(days, kind="stable")
    days, closes = days[order], closes[order]
    if np.any(days[1:] == days[:-1]):
        dup = days[1:][days[1:] == days[:-1]][0]
        raise DataError(f"duplicate date {dup}")
    return PriceSeries(days, closes)


def log_returns(prices: PriceSeries, scale: float = DEFAULT_SCALE) -> ReturnSeries:
    """``scale * ln(p_t / p_{t-1})``, dated at the later close."""
    closes = prices.closes
    r = scale * np.log(closes[1:] / closes[:-1])
    return ReturnSeries(prices.timestamps[1:], r, scale)


def realized_volatility(returns: ReturnSeries, k: int = 5) -> VolSeries:
    """Root of the sum of the ``k`` most recent squared returns."""
    k = int(k)
    if k < 1:
        raise DataError(f"window size must be >= 1, got {k}")
    eps = returns.returns
    if k > eps.size:
        raise DataError(f"window size {k} exceeds series length {eps.size}")
    # direct window sums; cumulative-sum differencing loses precision
    rv = sliding_window_view(eps**2, k).sum(axis=1)
    return VolSeries(returns.timestamps[k - 1 :], np.sqrt(rv), k)


def build_dataset(returns: ReturnSeries, vol: VolSeries, k: int, h: int) -> WindowedDataset:
    """One record per anchor ``t`` with ``k-1 <= t`` and ``t + h < n``."""
    k, h = int(k), int(h)
    if h < 1:
        raise DataError(f"horizon must be >= 1, got {h}")
    if vol.k != k:
        raise DataError(f"volatility window {vol.k} does not match k={k}")
    n = len(returns)
    anchors = np.arange(k - 1, n - h)
    if anchors.size == 0:
        raise DataError(f"series of length {n} yields no records for k={k}, h={h}")
    eps = returns.returns
    windows = np.stack([eps[t - k + 1 : t + 1] for t in anchors])
    targets = vol.at(anchors + h)
    return WindowedDataset(_frozen(windows), _frozen(targets), _frozen(anchors), k, h, returns)


def split(ds: WindowedDataset, ratios: Sequence[float] = (8, 1, 1)) -> SplitDataset:
    """Contiguous time-ordered partition.

    Sizes are ``floor(n * r_train)``, ``floor(n * r_val)`` and the remainder.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise DataError(f"invalid split ratios {ratios}")
    n = len(ds)
    total = float(sum(ratios))
    n_train = int(np.floor(n * ratios[0] / total + 1e-12))
    n_val = int(np.floor(n * ratios[1] / total + 1e-12))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise DataError(f"{n} records cannot be split into non-empty partitions {ratios}")
    return SplitDataset(
        ds.subset(0, n_train),
        ds.subset(n_train, n_train + n_val),
        ds.subset(n_train + n_val, n),
    )


def write_dataset(ds: WindowedDataset, path: str | Path) -> None:
    """Write records as whitespace-separated lines.

    Columns: anchor index, anchor date, ``k`` window values, target.
    """
    lines = [f"# k={ds.k} h={ds.h} scale={ds.returns.scale!r}"]
    dates = ds.timestamps
    for a, d, w, y in zip(ds.anchors, dates, ds.windows, ds.targets):
        vals = " ".join(repr(float(v)) for v in w)
        lines.append(f"{int(a)} {d} {vals} {float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path: str | Path) -> dict:
    """Parse a file produced by :func:`write_dataset` into plain arrays."""
    anchors, dates, windows, targets = [], [], [], []
    header = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                header[key] = val
            continue
        parts = line.split()
        anchors.append(int(parts[0]))
        dates.append(parts[1])
        windows.append([float(v) for v in parts[2:-1]])
        targets.append(float(parts[-1]))
    return {
        "k": int(header["k"]),
        "h": int(header["h"]),
        "anchors": np.array(anchors),
        "timestamps": np.array(dates, dtype="datetime64[D]"),
        "windows": np.array(windows),
        "targets": np.array(targets),
    }
