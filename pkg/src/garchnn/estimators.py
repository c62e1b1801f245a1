"""
scikit-learn style wrappers.

``X`` is always a single return series, shape ``(n,)`` or ``(n, 1)``.

* :class:`StochasticGarch` fits a GARCH-family model by maximum likelihood.
* :class:`NeuralGarch` trains an NN counterpart or a GARCH-LSTM by gradient
  descent on windowed records for one horizon.

``transform`` returns the conditional variance path; ``predict`` the
realized-variance forecast issued at every anchor with a full window.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from garchnn import garch, nn
from garchnn.evaluation import realized_forecast
from garchnn.losses import LossKind, series_loss
from garchnn.pipeline import counterpart_starts, train_multistart
from garchnn.timeseries import ReturnSeries, build_dataset, realized_volatility, split
from garchnn.training import TrainConfig, grid_search, record_terms, train
from garchnn.validation import check_positive_int, check_ratios, check_returns

__all__ = ["StochasticGarch", "NeuralGarch"]


def _anchors(n: int, k: int) -> np.ndarray:
    return np.arange(k - 1, n)


class StochasticGarch(RegressorMixin, BaseEstimator):
    """Classical GARCH(1,1), GJR or FIGARCH fitted by maximum likelihood.

    Parameters
    ----------
    kind : {'garch11', 'gjr', 'figarch'}
    loss : {'n_loss', 't_loss'}
    dof : float, optional
        Student-t degrees of freedom for ``t_loss``.
    horizon : int
        Forecast horizon used by :meth:`predict`.
    k : int
        Realized-volatility window.
    truncation : int
        FIGARCH kernel size.

    Attributes
    ----------
    params_ : parameter object
    fit_report_ : garch.FitReport
    init_var_ : float
    """

    def __init__(self, kind="garch11", loss="n_loss", dof=None, horizon=1, k=5,
                 truncation=garch.DEFAULT_TRUNCATION, maxiter=2000):
        self.kind = kind
        self.loss = loss
        self.dof = dof
        self.horizon = horizon
        self.k = k
        self.truncation = truncation
        self.maxiter = maxiter

    def fit(self, X, y=None):
        eps = check_returns(X, garch.MIN_FIT_LENGTH)
        opts = {"truncation": self.truncation} if self.kind == "figarch" else {}
        self.init_var_ = garch.initial_variance(eps)
        self.params_, self.fit_report_ = garch.fit_mle(
            self.kind, eps, LossKind(self.loss, self.dof), maxiter=self.maxiter, init_var=self.init_var_, **opts
        )
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Conditional variance of each shock in ``X``."""
        check_is_fitted(self, "params_")
        return garch.filter_series(self.params_, check_returns(X, 1), self.init_var_)

    def daily_forecast(self, X, horizon=None):
        """Daily variance forecasts for the ``horizon`` days after ``X`` ends."""
        check_is_fitted(self, "params_")
        eps = check_returns(X, 1)
        h = check_positive_int(horizon or self.horizon, "horizon")
        return garch.forecast_variances(self.params_, eps, [eps.size - 1], h, self.init_var_)[0]

    def predict(self, X):
        """Realized-variance forecast at every anchor ``t >= k - 1`` of ``X``."""
        check_is_fitted(self, "params_")
        eps = check_returns(X, self.k)
        h, k = check_positive_int(self.horizon, "horizon"), check_positive_int(self.k, "k")
        a = _anchors(eps.size, k)
        known, _ = record_terms(eps, a, h, k)
        daily = garch.forecast_variances(self.params_, eps, a, h, self.init_var_)
        return realized_forecast(daily, known, k)

    def score(self, X, y=None):
        """Mean log-likelihood per observation (higher is better)."""
        eps = check_returns(X, 1)
        return -series_loss(LossKind(self.loss, self.dof), eps**2, self.transform(eps)) / eps.size


class NeuralGarch(RegressorMixin, BaseEstimator):
    """NN counterpart or GARCH-LSTM trained with ADAM.

    Parameters
    ----------
    model : {'garch11', 'gjr', 'figarch', 'garch-lstm'}
        Counterpart kind, or ``'garch-lstm'``.
    kernel : {'garch11', 'gjr', 'figarch'}
        GARCH-LSTM kernel.
    loss : {'t_loss', 'n_loss', 'mse', 'mae'}
    dof : float
    horizon, k : int
        Target ``sigma^2_{t+h}`` of ``k``-day realized variance.
    lr : float
    grid : bool
        Select the learning rate from the log-spaced grid by validation loss.
    max_epochs : int
    batch : {'auto', 'full', 'minibatch'}
        ``auto`` is full-sequence for counterparts and minibatch for GARCH-LSTM.
    ratios : tuple
        Train/val/test proportions.
    fixed : dict, optional
        GARCH-LSTM parameters held constant (``{'w': 0.0}`` disables the LSTM).
    strategy : {'direct', 'iterated'}
        Counterpart multi-step strategy.
    multistart : bool
        Screen the FIGARCH start grid before training counterparts.
    seed : int
        Recorded for reproducibility; training itself is deterministic.

    Attributes
    ----------
    fitted_ : training.TrainedModel
    history_ : training.TrainHistory
    values_ : dict
        Trained parameter values.
    """

    def __init__(self, model="garch11", kernel="gjr", loss="t_loss", dof=5.0, horizon=1, k=5,
                 lr=1e-2, grid=False, max_epochs=200, batch="auto", ratios=(8, 1, 1), fixed=None,
                 strategy="direct", multistart=False, truncation=garch.DEFAULT_TRUNCATION, seed=0):
        self.model = model
        self.kernel = kernel
        self.loss = loss
        self.dof = dof
        self.horizon = horizon
        self.k = k
        self.lr = lr
        self.grid = grid
        self.max_epochs = max_epochs
        self.batch = batch
        self.ratios = ratios
        self.fixed = fixed
        self.strategy = strategy
        self.multistart = multistart
        self.truncation = truncation
        self.seed = seed

    def _build(self):
        if self.model in ("garch-lstm", "garch_lstm"):
            return nn.GarchLSTM(self.kernel, truncation=self.truncation, fixed=self.fixed)
        return nn.CounterpartModel(self.model, truncation=self.truncation, strategy=self.strategy)

    def _config(self, lstm: bool) -> TrainConfig:
        batch = self.batch if self.batch != "auto" else ("minibatch" if lstm else "full")
        return TrainConfig(lr=self.lr, max_epochs=self.max_epochs, loss=self.loss, dof=self.dof,
                           horizon=self.horizon, batch=batch, seed=self.seed)

    def fit(self, X, y=None):
        eps = check_returns(X, 30)
        k = check_positive_int(self.k, "k")
        h = check_positive_int(self.horizon, "horizon")
        series = ReturnSeries.from_array(eps)
        data = split(build_dataset(series, realized_volatility(series, k), k, h), check_ratios(self.ratios))
        model = self._build()
        cfg = self._config(isinstance(model, nn.GarchLSTM))
        if self.grid:
            self.fitted_, self.history_, self.lr_ = grid_search(model, data, cfg)
        elif self.multistart and not isinstance(model, nn.GarchLSTM):
            start = int(data.train.anchors[0]) - k + 1
            sv = garch.initial_variance(eps[start : int(data.train.anchors[-1]) + 1])
            self.fitted_, self.history_ = train_multistart(model, data, cfg, counterpart_starts(model, sv))
            self.lr_ = self.lr
        else:
            self.fitted_, self.history_ = train(model, data, cfg)
            self.lr_ = self.lr
        self.values_ = dict(self.fitted_.values)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """One-step conditional variances along ``X``, starting from the training state."""
        check_is_fitted(self, "fitted_")
        eps = check_returns(X, 1)
        return _restarted(self.fitted_).variance_path(eps)

    def predict(self, X):
        """Realized-variance forecast at every anchor ``t >= k - 1`` of ``X``."""
        check_is_fitted(self, "fitted_")
        eps = check_returns(X, self.k)
        return _restarted(self.fitted_).forecast_realized(eps, _anchors(eps.size, self.k))

    def score(self, X, y=None):
        """Negative mean training loss of the ``horizon`` records in ``X``."""
        check_is_fitted(self, "fitted_")
        eps = check_returns(X, self.k + self.horizon)
        k, h = self.k, self.horizon
        a = np.arange(k - 1, eps.size - h)
        known, unknown = record_terms(eps, a, h, k)
        pred = self.predict(eps)[: a.size]
        kind = LossKind(self.loss, self.dof)
        if kind.is_likelihood:
            return -series_loss(kind, unknown, pred - known) / a.size
        return -series_loss(kind, known + unknown, pred) / a.size


def _restarted(fitted):
    return replace(fitted, start=0)
