"""GARCH-family volatility models, their neural counterparts and GARCH-LSTM."""

from garchnn.estimators import NeuralGarch, StochasticGarch
from garchnn.exceptions import (
    DataError,
    DomainError,
    GarchNNError,
    InvalidParameterError,
    LeakageError,
    NumericalError,
)
from garchnn.garch import FigarchParams, Garch11Params, GjrParams, filter_series, fit_mle, simulate
from garchnn.nn import CounterpartModel, GarchLSTM
from garchnn.training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "StochasticGarch",
    "NeuralGarch",
    "Garch11Params",
    "GjrParams",
    "FigarchParams",
    "filter_series",
    "fit_mle",
    "simulate",
    "CounterpartModel",
    "GarchLSTM",
    "TrainConfig",
    "train",
    "GarchNNError",
    "DataError",
    "DomainError",
    "InvalidParameterError",
    "LeakageError",
    "NumericalError",
]
