"""
Gradient training of counterpart and GARCH-LSTM models.

Models run over the return series in time order, carrying their recurrent
state from one record to the next.  Each record anchored at ``t`` asks for a
forecast of the realized variance ``sum_{j=t+h-k+1}^{t+h} eps_j^2``.  Squared
shocks dated ``<= t`` are known at the anchor; the model supplies the rest:

* recurrent counterparts iterate their recursion (unknown ``eps^2`` replaced
  by forecast variances) and sum the forecast daily variances;
* GARCH-LSTM is trained per horizon and its one-step output, multiplied by
  the number of unknown days, is the direct forecast of the unknown part.

Likelihood losses score the unknown part against the realized sum of future
squared shocks (exactly ``eps_{t+1}^2`` when ``h = 1``); ``mse``/``mae``
compare realized volatilities.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from garchnn import autograd as ad
from garchnn.exceptions import DataError, DomainError, LeakageError, NumericalError
from garchnn.losses import LossKind, loss_value
from garchnn.timeseries import SplitDataset, WindowedDataset

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "TrainedModel",
    "AdamState",
    "adam_step",
    "record_terms",
    "record_forecasts",
    "check_leakage",
    "purge_overlap",
    "train",
    "grid_search",
    "LR_GRID",
]

logger = logging.getLogger(__name__)

# log-spaced over [3e-4, 3e-2]
LR_GRID = tuple(float(x) for x in np.geomspace(3e-4, 3e-2, 5))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    early_stop_patience: int = 20
    max_epochs: int = 200
    seed: int = 0
    loss: str = "t_loss"
    dof: float = 5.0
    horizon: int = 1
    batch: str = "full"
    batch_size: int = 64
    likelihood_target: str = "unknown"
    max_halvings: int = 20
    monitor: str = "val"
    tol: float = 0.0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be > 0, got {self.lr}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.batch not in ("full", "minibatch"):
            raise ValueError(f"batch must be 'full' or 'minibatch', got {self.batch!r}")
        if self.likelihood_target not in ("unknown", "full"):
            raise ValueError("likelihood_target must be 'unknown' or 'full'")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.monitor not in ("val", "train"):
            raise ValueError("monitor must be 'val' or 'train'")
        LossKind(self.loss, self.dof)

    @property
    def loss_kind(self) -> LossKind:
        return LossKind(self.loss, self.dof)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf
    best_score: float = math.inf
    stop_reason: str = "not_started"
    seconds: float = 0.0

    def __len__(self) -> int:
        return len(self.val_loss)

    def rows(self) -> list[tuple]:
        return [
            (i, self.train_loss[i], self.val_loss[i], self.lr[i])
            for i in range(len(self.val_loss))
        ]


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
    """One bias-corrected ADAM update.

    Returns
    -------
    (ndarray, AdamState)
        Updated parameters and moment state.
    """
    params = np.asarray(params, dtype=float)
    g = np.asarray(grads, dtype=float)
    if params.shape != g.shape:
        raise ValueError(f"shape mismatch: {params.shape} vs {g.shape}")
    b1, b2 = betas
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


# ---------------------------------------------------------------------------
# Record-level forecasting
# ---------------------------------------------------------------------------


def record_terms(eps: np.ndarray, anchors: np.ndarray, h: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Known and unknown parts of each record's realized-variance target.

    Returns
    -------
    known, unknown : ndarray
        ``sum eps_j^2`` over target-window days ``j <= t`` and ``j > t``.
    """
    e2 = np.asarray(eps, dtype=float) ** 2
    anchors = np.asarray(anchors)
    lo = anchors + h - k + 1
    split_at = np.maximum(lo, anchors + 1)
    known = np.array([e2[l : t + 1].sum() if l <= t else 0.0 for l, t in zip(lo, anchors)])
    unknown = np.array([e2[s : t + h + 1].sum() for s, t in zip(split_at, anchors)])
    return known, unknown


def _advance(model, prep, eps, pos, s, state, target_pos):
    while pos < target_pos:
        s, state = model.step(prep, eps[pos], state)
        pos += 1
    return pos, s, state


def _unknown_part(model, prep, s, state, h: int, k: int):
    m = min(h, k)
    if model.direct:
        return s if m == 1 else s * float(m)
    path = [s]
    for _ in range(h - 1):
        s, state = model.expected_step(prep, state)
        path.append(s)
    return path[-1] if m == 1 else ad.vsum(path[-m:])


def record_forecasts(model, prep, eps, anchors, h: int, k: int, cursor):
    """Forecast the unknown target part for each anchor, advancing ``cursor``.

    ``cursor`` is ``(pos, s, state)``: the model has produced ``s``, the
    variance of ``eps[pos]``, and holds ``state``.  Anchors must be increasing
    and ``>= pos - 1``.
    """
    pos, s, state = cursor
    if len(anchors) and hasattr(model, "advance"):
        stop = int(anchors[-1]) + 1
        path, state_at = model.advance(prep, eps, pos, s, state, stop)
        out = [
            _unknown_part(model, prep, path[int(t) + 1 - pos], state_at(int(t) + 1), h, k)
            for t in anchors
        ]
        return out, (stop, path[-1], state_at(stop))
    out = []
    for t in anchors:
        pos, s, state = _advance(model, prep, eps, pos, s, state, int(t) + 1)
        out.append(_unknown_part(model, prep, s, state, h, k))
    return out, (pos, s, state)


def _record_loss(kind: LossKind, target_mode: str, u, known: float, unknown: float):
    if kind.is_likelihood:
        if target_mode == "unknown":
            return loss_value(kind, unknown, u)
        return loss_value(kind, known + unknown, known + u)
    return loss_value(kind, known + unknown, known + u)


@dataclass
class TrainedModel:
    """A model with fixed parameter values and the context needed to run it."""

    model: object
    values: dict
    init_var: float
    start: int
    k: int
    h: int

    @property
    def prep(self) -> dict:
        return self.model.prepare(self.values)

    def _cursor(self, prep):
        s0, state0 = self.model.initial_state(prep, self.init_var)
        return (self.start, s0, state0)

    def forecast_unknown(self, eps, anchors) -> np.ndarray:
        prep = self.prep
        out, _ = record_forecasts(self.model, prep, eps, anchors, self.h, self.k, self._cursor(prep))
        return np.array([ad.value_of(u) for u in out])

    def forecast_realized(self, eps, anchors) -> np.ndarray:
        """Realized-variance forecast for each anchor."""
        known, _ = record_terms(eps, anchors, self.h, self.k)
        return known + self.forecast_unknown(eps, anchors)

    def variance_path(self, eps) -> np.ndarray:
        """One-step conditional variances ``sigma^2_t`` for ``t >= start``."""
        prep = self.prep
        s, state = self.model.initial_state(prep, self.init_var)
        if hasattr(self.model, "advance"):
            path, _ = self.model.advance(prep, eps, self.start, s, state, len(eps) - 1)
            return np.array([ad.value_of(v) for v in path])
        out = [s]
        for e in eps[self.start : len(eps) - 1]:
            s, state = self.model.step(prep, e, state)
            out.append(s)
        return np.array([ad.value_of(v) for v in out])

    def one_step(self, eps, anchors) -> np.ndarray:
        """``sigma^2_{t+1}`` for each anchor ``t``."""
        path = self.variance_path(eps[: int(np.max(anchors)) + 2])
        return path[np.asarray(anchors) + 1 - self.start]


# ---------------------------------------------------------------------------
# Leakage guard
# ---------------------------------------------------------------------------


def check_leakage(consumed_max: int, test: WindowedDataset) -> None:
    """Raise if training read a shock dated after the first test anchor."""
    first = int(test.anchors[0])
    if consumed_max > first:
        raise LeakageError(
            f"training consumed return index {consumed_max} beyond first test anchor {first}"
        )


def purge_overlap(data: SplitDataset) -> tuple[WindowedDataset, WindowedDataset]:
    """Drop train/val records whose targets reach past the first test anchor."""
    first = int(data.test.anchors[0])
    h = data.train.h

    def keep(ds):
        n = int(np.sum(ds.anchors + h <= first))
        return ds.subset(0, n)

    train, val = keep(data.train), keep(data.val)
    if len(train) == 0 or len(val) == 0:
        raise DataError(
            f"no validation records remain after purging targets that overlap the test period (h={h})"
        )
    return train, val


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _mean_loss(terms):
    return ad.vsum(terms) * (1.0 / len(terms))


def _evaluate(model, values, eps, init_var, start, train_anchors, eval_anchors, h, k, kind, mode, terms):
    """Mean loss over ``eval_anchors`` after rolling through the training period."""
    prep = model.prepare(values)
    s0, st0 = model.initial_state(prep, init_var)
    cursor = (start, s0, st0)
    _, cursor = record_forecasts(model, prep, eps, train_anchors[-1:], h, k, cursor)
    out, _ = record_forecasts(model, prep, eps, eval_anchors, h, k, cursor)
    known, unknown = terms
    total = 0.0
    for u, kn, un in zip(out, known, unknown):
        total += _record_loss(kind, mode, u, kn, un)
    return total / len(out)


def _project(model, pz, raw_old, raw_new, max_halvings):
    """Keep FIGARCH lag weights non-negative by shrinking ``d`` toward its last feasible value."""
    vals = pz.to_constrained(list(raw_new))
    if model.weights_feasible(vals):
        return raw_new
    if "d" not in pz.names:
        return raw_old
    j = pz.names.index("d")
    trial = raw_new.copy()
    trial[j] = raw_old[j]
    if not model.weights_feasible(pz.to_constrained(list(trial))):
        return raw_old
    lo, hi = raw_old[j], raw_new[j]
    for _ in range(max_halvings):
        mid = 0.5 * (lo + hi)
        trial[j] = mid
        if model.weights_feasible(pz.to_constrained(list(trial))):
            lo = mid
        else:
            hi = mid
    trial[j] = lo
    return trial


def train(model, data: SplitDataset, cfg: TrainConfig, init_values: Mapping[str, float] | None = None):
    """Fit ``model`` by ADAM on the training records.

    Parameters
    ----------
    model : CounterpartModel or GarchLSTM
    data : SplitDataset
        Records built with the horizon the model is trained for.
    cfg : TrainConfig
    init_values : mapping, optional
        Constrained starting values; the model's defaults otherwise.

    Returns
    -------
    TrainedModel, TrainHistory
        Parameters of the epoch with the lowest validation loss.

    Notes
    -----
    The learning rate halves after ``plateau_patience`` epochs without a new
    best validation loss; training stops after ``early_stop_patience`` such
    epochs or ``max_epochs``.
    """
    h, k = data.train.h, data.train.k
    if cfg.horizon != h:
        raise ValueError(f"config horizon {cfg.horizon} does not match dataset horizon {h}")
    train_ds, val_ds = purge_overlap(data)
    eps = data.returns.returns
    start = int(train_ds.anchors[0]) - k + 1
    train_anchors = train_ds.anchors
    val_anchors = val_ds.anchors
    consumed = int(max(train_anchors[-1], val_anchors[-1])) + h
    check_leakage(consumed, data.test)

    init_var = float(np.mean(eps[start : int(train_anchors[-1]) + 1] ** 2)) or 1.0
    kind = cfg.loss_kind
    mode = cfg.likelihood_target
    train_terms = record_terms(eps, train_anchors, h, k)
    val_terms = record_terms(eps, val_anchors, h, k)

    pz = model.parameterization
    values0 = dict(init_values) if init_values is not None else model.default_values(init_var)
    values0 = {n: values0[n] for n in pz.names}
    raw = pz.to_raw(values0)
    history = TrainHistory()
    best_raw = raw.copy()

    def snapshot(r):
        vals = {n: float(ad.value_of(v)) for n, v in pz.to_constrained(list(r)).items()}
        return TrainedModel(model, vals, init_var, start, k, h)

    if cfg.max_epochs == 0:
        history.stop_reason = "max_epochs"
        return snapshot(raw), history

    if cfg.batch == "full":
        batches = [np.arange(len(train_anchors))]
    else:
        idx = np.arange(len(train_anchors))
        batches = [idx[i : i + cfg.batch_size] for i in range(0, idx.size, cfg.batch_size)]

    adam = AdamState.zeros(len(pz))
    lr = cfg.lr
    since_best = 0
    since_plateau = 0
    t_start = time.perf_counter()
    for epoch in range(cfg.max_epochs):
        cursor = None
        epoch_loss = 0.0
        raw_start = raw.copy()
        for b in batches:
            tape = ad.Tape()
            leaves = tape.variables(raw)
            vals = pz.to_constrained(leaves)
            prep = model.prepare(vals)
            if cursor is None:
                s0, st0 = model.initial_state(prep, init_var)
                cursor = (start, s0, st0)
            try:
                out, cursor = record_forecasts(model, prep, eps, train_anchors[b], h, k, cursor)
                terms = [
                    _record_loss(kind, mode, u, train_terms[0][i], train_terms[1][i])
                    for u, i in zip(out, b)
                ]
            except DomainError as exc:
                raise NumericalError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
            loss = _mean_loss(terms)
            if not math.isfinite(loss.value):
                bad = next(i for i, t in zip(b, terms) if not math.isfinite(ad.value_of(t)))
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, record {bad}", index=int(bad), epoch=epoch
                )
            grads = np.array(tape.grad(loss, leaves))
            if not np.all(np.isfinite(grads)):
                raise NumericalError(f"non-finite gradient at epoch {epoch}", epoch=epoch)
            new_raw, adam = adam_step(raw, grads, adam, lr, cfg.betas, cfg.adam_eps)
            raw = _project(model, pz, raw, new_raw, cfg.max_halvings)
            epoch_loss += loss.value * len(b)
            pos, s, st = cursor
            cursor = (pos, ad.value_of(s), st.detached())

        vals = {n: float(ad.value_of(v)) for n, v in pz.to_constrained(list(raw)).items()}
        val_loss = _evaluate(model, vals, eps, init_var, start, train_anchors, val_anchors, h, k, kind, mode, val_terms)
        if not math.isfinite(val_loss):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        history.train_loss.append(epoch_loss / len(train_anchors))
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        score = val_loss if cfg.monitor == "val" else history.train_loss[-1]

        if not math.isfinite(history.best_score) or score < history.best_score - cfg.tol * abs(history.best_score):
            history.best_score = score
            history.best_val = val_loss
            history.best_epoch = epoch
            # the training loss of an epoch is measured at its starting parameters
            best_raw = raw.copy() if cfg.monitor == "val" else raw_start
            since_best = 0
            since_plateau = 0
        else:
            since_best += 1
            since_plateau += 1
            if since_best >= cfg.early_stop_patience:
                history.stop_reason = "early_stop"
                break
            if since_plateau >= cfg.plateau_patience:
                lr *= cfg.plateau_factor
                since_plateau = 0
    else:
        history.stop_reason = "max_epochs"
    history.seconds = time.perf_counter() - t_start
    logger.debug("%s trained: %d epochs, best %d (%.6g), %s", getattr(model, "name", model),
                 len(history), history.best_epoch, history.best_val, history.stop_reason)
    return snapshot(best_raw), history


def grid_search(model, data: SplitDataset, cfg: TrainConfig, lrs: Sequence[float] = LR_GRID,
                init_values: Mapping[str, float] | None = None):
    """Train once per learning rate and keep the run with the best validation loss."""
    best = None
    for lr in lrs:
        fitted, hist = train(model, data, replace(cfg, lr=float(lr)), init_values)
        if best is None or hist.best_val < best[1].best_val:
            best = (fitted, hist, float(lr))
    return best
