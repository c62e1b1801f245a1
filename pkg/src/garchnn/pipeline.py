"""
End-to-end workflows shared by the estimators, the command line and the
acceptance tests: data handoff with the leakage guard, classical and neural
fitting, forecasting on the test partition, checkpoints and the
classical-versus-counterpart study.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from garchnn import garch, nn
from garchnn import io as gio
from garchnn.evaluation import ForecastSeries, realized_forecast
from garchnn.exceptions import DataError, InvalidParameterError
from garchnn.losses import LossKind
from garchnn.timeseries import (
    DEFAULT_SCALE,
    ReturnSeries,
    SplitDataset,
    build_dataset,
    load_prices,
    log_returns,
    realized_volatility,
    split,
)
from garchnn.training import (
    TrainConfig,
    TrainedModel,
    check_leakage,
    grid_search,
    record_terms,
    train,
)

__all__ = [
    "HORIZONS",
    "ClassicalFit",
    "load_series",
    "write_returns",
    "prepare",
    "first_test_anchor",
    "fit_classical",
    "build_model",
    "train_neural",
    "forecast_series",
    "save_checkpoint",
    "load_checkpoint",
    "draw_params",
    "recovery_study",
    "study_mse",
    "train_multistart",
    "counterpart_starts",
    "loss_ablation",
]

logger = logging.getLogger(__name__)

HORIZONS = (1, 3, 5, 10, 21)
_RETURN_COLUMNS = ("return", "returns", "eps")


def load_series(path: str | Path, scale: float = DEFAULT_SCALE) -> ReturnSeries:
    """Read returns (``date,return``) or prices (``date,close``) from a table.

    Price tables are converted to scaled log returns; return tables are used
    as they are.
    """
    try:
        head = pd.read_csv(path, sep=None, engine="python", nrows=0)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    cols = {c.strip().lower(): c for c in head.columns}
    ret_col = next((cols[c] for c in _RETURN_COLUMNS if c in cols), None)
    if ret_col is None:
        return log_returns(load_prices(path), scale)
    frame = pd.read_csv(path, sep=None, engine="python")
    if "date" not in cols:
        raise DataError(f"missing date column in {path}")
    try:
        dates = pd.to_datetime(frame[cols["date"]], format="ISO8601").to_numpy().astype("datetime64[D]")
        values = frame[ret_col].astype(float).to_numpy()
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable return table {path}: {exc}") from exc
    return ReturnSeries(dates, values, scale)


def write_returns(path: str | Path, series: ReturnSeries) -> Path:
    rows = zip((str(d) for d in series.timestamps), series.returns.tolist())
    return gio.write_table(path, ["date", "return"], rows)


def prepare(series: ReturnSeries, k: int, h: int, ratios: Sequence[float] = (8, 1, 1)) -> SplitDataset:
    """Realized volatility, records and the chronological split."""
    return split(build_dataset(series, realized_volatility(series, k), k, h), ratios)


def first_test_anchor(data: SplitDataset) -> int:
    return int(data.test.anchors[0])


# ---------------------------------------------------------------------------
# Classical path
# ---------------------------------------------------------------------------


@dataclass
class ClassicalFit:
    """Maximum-likelihood GARCH-family model with iterated forecasts."""

    params: object
    init_var: float
    report: garch.FitReport | None = None
    start: int = 0

    @property
    def name(self) -> str:
        return self.params.kind

    @property
    def values(self) -> dict:
        return self.params.as_dict()

    def one_step(self, eps, anchors) -> np.ndarray:
        """``sigma^2_{t+1 | t}`` for each anchor."""
        return self.daily(eps, anchors, 1)[:, 0]

    def daily(self, eps, anchors, h: int) -> np.ndarray:
        eps = np.asarray(eps, dtype=float)[self.start :]
        a = np.asarray(anchors) - self.start
        return garch.forecast_variances(self.params, eps, a, h, self.init_var)

    def forecast_realized(self, eps, anchors, h: int, k: int) -> np.ndarray:
        known, _ = record_terms(eps, anchors, h, k)
        return realized_forecast(self.daily(eps, anchors, h), known, k)


def fit_classical(kind: str, data: SplitDataset, loss: str = "n_loss", dof: float | None = None,
                  **options) -> ClassicalFit:
    """MLE on every return before the first test anchor."""
    eps = data.returns.returns
    cut = first_test_anchor(data)
    check_leakage(cut - 1, data.test)
    fit_eps = eps[:cut]
    init_var = garch.initial_variance(fit_eps)
    params, report = garch.fit_mle(kind, fit_eps, LossKind(loss, dof), init_var=init_var, **options)
    return ClassicalFit(params, init_var, report)


# ---------------------------------------------------------------------------
# Neural path
# ---------------------------------------------------------------------------


def build_model(kind: str, counterpart: bool = True, kernel: str = "gjr", **options):
    """Model object for a ``--model`` choice."""
    if kind in ("garch-lstm", "garch_lstm"):
        return nn.GarchLSTM(kernel, **options)
    if not counterpart:
        raise ValueError(f"{kind!r} is classical; use fit_classical")
    options.pop("fixed", None)
    return nn.CounterpartModel(kind, **options)


def train_neural(model, data: SplitDataset, cfg: TrainConfig, grid: bool = False,
                 init_values: Mapping[str, float] | None = None):
    """Train ``model``; with ``grid`` pick the learning rate by validation loss.

    Returns
    -------
    TrainedModel, TrainHistory, float
        The fitted model, its history and the learning rate used.
    """
    if grid:
        return grid_search(model, data, cfg, init_values=init_values)
    fitted, hist = train(model, data, cfg, init_values)
    return fitted, hist, cfg.lr


def forecast_series(fitted, data: SplitDataset, anchors=None) -> ForecastSeries:
    """Realized-variance forecasts for the test anchors (or ``anchors``)."""
    ds = data.test
    anchors = ds.anchors if anchors is None else np.asarray(anchors)
    eps = data.returns.returns
    h, k = ds.h, ds.k
    if isinstance(fitted, ClassicalFit):
        values = fitted.forecast_realized(eps, anchors, h, k)
    else:
        if fitted.h != h or fitted.k != k:
            raise ValueError(f"model trained for h={fitted.h}, k={fitted.k}; data has h={h}, k={k}")
        values = fitted.forecast_realized(eps, anchors)
    name = fitted.name if isinstance(fitted, ClassicalFit) else fitted.model.name
    return ForecastSeries(anchors, data.returns.timestamps[anchors], values, h, name)


def train_multistart(model, data: SplitDataset, cfg: TrainConfig, starts: Sequence[Mapping[str, float]],
                     screen_epochs: int = 15):
    """Screen several starting points briefly, then train the best to the end.

    Each start runs ``screen_epochs`` epochs; the one with the lowest
    monitored loss continues from its screened parameters under ``cfg``.
    """
    best = None
    for values in starts:
        fitted, hist = train(model, data, replace(cfg, max_epochs=screen_epochs), values)
        score = min(hist.val_loss) if cfg.monitor == "val" else min(hist.train_loss)
        if best is None or score < best[0]:
            best = (score, fitted)
    return train(model, data, cfg, best[1].values)


def counterpart_starts(model, sample_var: float) -> list[dict]:
    """Default start plus, for FIGARCH, the classical multistart grid."""
    base = model.default_values(sample_var)
    if getattr(model, "kind", None) != "figarch":
        return [base]
    init = garch.params_from_dict("figarch", base, **model.options())
    return [base] + [p.as_dict() for p in garch._start_grid("figarch", init, model.options())]


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str | Path, fitted, extra: Mapping[str, object] | None = None) -> Path:
    """Key/value document for a classical fit or a trained neural model."""
    meta: dict = {}
    if isinstance(fitted, ClassicalFit):
        meta["family"] = "classical"
        meta["init_var"] = float(fitted.init_var)
        meta["start"] = int(fitted.start)
        if fitted.params.kind == "figarch":
            meta["truncation"] = fitted.params.truncation
            meta["scaled_intercept"] = fitted.params.scaled_intercept
        kind = fitted.params.kind
        values = fitted.params.as_dict()
    else:
        model = fitted.model
        lstm = isinstance(model, nn.GarchLSTM)
        kernel = model.kernel if lstm else model
        meta["family"] = "garch-lstm" if lstm else "counterpart"
        meta["kernel"] = kernel.kind
        meta["horizon"] = int(fitted.h)
        meta["k"] = int(fitted.k)
        meta["init_var"] = float(fitted.init_var)
        meta["start"] = int(fitted.start)
        meta["truncation"] = kernel.truncation
        meta["scaled_intercept"] = kernel.scaled_intercept
        if not lstm:
            meta["strategy"] = model.strategy
        for name, v in (model.fixed.items() if lstm else ()):
            meta[f"fixed.{name}"] = float(v)
        kind = "garch-lstm" if lstm else kernel.kind
        values = fitted.values
    meta.update(extra or {})
    return gio.write_params(path, kind, values, meta)


def load_checkpoint(path: str | Path):
    """Inverse of :func:`save_checkpoint`."""
    kind, values, meta = gio.read_params(path)
    family = meta.get("family", "classical")
    options = {}
    if "truncation" in meta:
        options = {"truncation": int(meta["truncation"]), "scaled_intercept": bool(meta["scaled_intercept"])}
    try:
        if family == "classical":
            params = garch.params_from_dict(kind, values, **(options if kind == "figarch" else {}))
            return ClassicalFit(params, float(meta["init_var"]), None, int(meta.get("start", 0)))
        if family == "counterpart":
            model = nn.CounterpartModel(kind, strategy=str(meta.get("strategy", "direct")), **options)
        elif family == "garch-lstm":
            fixed = {k[6:]: float(v) for k, v in meta.items() if k.startswith("fixed.")}
            model = nn.GarchLSTM(str(meta["kernel"]), fixed=fixed, **options)
        else:
            raise DataError(f"{path}: unknown model family {family!r}")
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed checkpoint: {exc}") from exc
    missing = set(model.parameterization.names) - set(values)
    if missing:
        raise DataError(f"{path}: missing parameters {sorted(missing)}")
    return TrainedModel(model, values, float(meta["init_var"]), int(meta["start"]), int(meta["k"]), int(meta["horizon"]))


# ---------------------------------------------------------------------------
# Classical versus counterpart study
# ---------------------------------------------------------------------------


def draw_params(kind: str, rng: np.random.Generator, low: float = 0.1, high: float = 0.9, **options):
    """Uniform draw in ``(low, high)`` per parameter, rejecting invalid models."""
    names = garch.parameterization(kind).names
    for _ in range(10_000):
        vals = dict(zip(names, rng.uniform(low, high, len(names))))
        try:
            return garch.params_from_dict(kind, vals, **options)
        except InvalidParameterError:
            continue
    raise RuntimeError(f"could not draw admissible {kind} parameters")


@dataclass
class StudyRow:
    seed: int
    truth: dict
    mle: dict
    counterpart: dict
    mle_seconds: float
    nn_seconds: float
    epochs: int


def recovery_study(kind: str, seeds: Sequence[int], n: int = 5000, cfg: TrainConfig | None = None,
                   loss: str = "n_loss", dist: str = "normal", dof: float | None = None,
                   param_seed: int = 2024, **options):
    """Simulate, then fit by MLE and by gradient training of the counterpart.

    Ground-truth parameters for seed ``s`` are drawn from
    ``default_rng([param_seed, s])``; the series from ``simulate(seed=s)``.

    Returns
    -------
    list of StudyRow
    """
    import time

    cfg = cfg or TrainConfig(lr=0.05, max_epochs=100, loss=loss, monitor="train", tol=1e-7)
    rows = []
    for s in seeds:
        truth = draw_params(kind, np.random.default_rng([param_seed, int(s)]), **options)
        eps = garch.simulate(truth, n, seed=int(s), dist=dist, dof=dof)
        data = prepare(ReturnSeries.from_array(eps), k=1, h=1)
        t0 = time.perf_counter()
        mle = fit_classical(kind, data, loss, dof, **options)
        t1 = time.perf_counter()
        model = nn.CounterpartModel(kind, **options)
        run_cfg = replace(cfg, loss=loss, dof=dof or 5.0)
        starts = counterpart_starts(model, garch.initial_variance(eps[: first_test_anchor(data)]))
        if len(starts) > 1:
            fitted, hist = train_multistart(model, data, run_cfg, starts)
        else:
            fitted, hist = train(model, data, run_cfg)
        t2 = time.perf_counter()
        rows.append(StudyRow(int(s), truth.as_dict(), mle.params.as_dict(), dict(fitted.values),
                             t1 - t0, t2 - t1, len(hist)))
    return rows


def study_mse(rows: Sequence[StudyRow]) -> dict:
    """Per-parameter mean squared error of both estimators."""
    names = list(rows[0].truth)
    out = {}
    for which in ("mle", "counterpart"):
        out[which] = {
            p: float(np.mean([(getattr(r, which)[p] - r.truth[p]) ** 2 for r in rows])) for p in names
        }
    return out


@dataclass
class AblationRow:
    seed: int
    mae: dict
    mae_proxy: dict


def loss_ablation(seeds: Sequence[int], losses: Sequence[str] = ("t_loss", "mse"), kind: str = "garch11",
                  truth=None, n: int = 5000, dof: float = 5.0, cfg: TrainConfig | None = None):
    """Train the same counterpart under several losses on Student-t data.

    Every loss sees the same series per seed (``k = h = 1``, so the training
    target is the next squared shock).  Test MAE is measured against the
    simulated conditional volatility; ``mae_proxy`` uses ``|eps_{t+1}|``
    instead, the realized-volatility proxy available on market data.

    Returns
    -------
    list of AblationRow
    """
    truth = truth or garch.Garch11Params(0.05, 0.15, 0.8)
    cfg = cfg or TrainConfig(lr=0.05, max_epochs=100, monitor="train", tol=1e-7)
    rows = []
    for s in seeds:
        eps, var = garch.simulate(truth, n, seed=int(s), dist="t", dof=dof, return_variance=True)
        data = prepare(ReturnSeries.from_array(eps), k=1, h=1)
        a = data.test.anchors
        mae, proxy = {}, {}
        for loss in losses:
            fitted, _ = train(nn.CounterpartModel(kind), data, replace(cfg, loss=loss, dof=dof, horizon=1))
            sigma = np.sqrt(fitted.forecast_realized(eps, a))
            mae[loss] = float(np.mean(np.abs(sigma - np.sqrt(var[a + 1]))))
            proxy[loss] = float(np.mean(np.abs(sigma - np.abs(eps[a + 1]))))
        rows.append(AblationRow(int(s), mae, proxy))
    return rows
