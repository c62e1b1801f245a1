import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from garchnn import garch
from garchnn.estimators import NeuralGarch, StochasticGarch
from garchnn.exceptions import DataError


@pytest.fixture(scope="module")
def eps():
    return garch.simulate(garch.Garch11Params(0.1, 0.1, 0.8), 800, seed=4)


class TestStochasticGarch:
    def test_params_and_clone(self):
        est = StochasticGarch(kind="gjr", horizon=5)
        assert est.get_params()["horizon"] == 5
        c = clone(est.set_params(k=3))
        assert c.get_params() == est.get_params() and c is not est

    def test_fit_predict_score(self, eps):
        est = StochasticGarch(horizon=3, k=5).fit(eps)
        assert est.params_.kind == "garch11"
        path = est.transform(eps)
        np.testing.assert_array_equal(path, garch.filter_series(est.params_, eps, est.init_var_))
        pred = est.predict(eps)
        assert pred.shape == (eps.size - 4,) and np.all(pred > 0)
        assert np.isfinite(est.score(eps))
        assert est.daily_forecast(eps, 4).shape == (4,)

    def test_one_day_prediction_is_filter(self, eps):
        est = StochasticGarch(horizon=1, k=1).fit(eps)
        np.testing.assert_allclose(est.predict(eps)[:-1], est.transform(eps)[1:], rtol=1e-13)

    def test_accepts_pandas_column(self, eps):
        a = StochasticGarch().fit(eps).params_
        b = StochasticGarch().fit(pd.DataFrame({"r": eps})).params_
        assert a == b

    def test_not_fitted_and_bad_input(self, eps):
        with pytest.raises(NotFittedError):
            StochasticGarch().predict(eps)
        with pytest.raises(DataError):
            StochasticGarch().fit(np.ones((10, 2)))


class TestNeuralGarch:
    def test_params_and_clone(self):
        est = NeuralGarch(model="garch-lstm", kernel="figarch", fixed={"w": 0.0})
        c = clone(est)
        assert c.get_params()["fixed"] == {"w": 0.0}

    @pytest.mark.parametrize("model", ["gjr", "garch-lstm"])
    def test_fit_predict_score(self, eps, model):
        est = NeuralGarch(model=model, horizon=3, max_epochs=3).fit(eps)
        assert len(est.history_) == 3
        assert set(est.values_) == set(est.fitted_.model.parameterization.names)
        pred = est.predict(eps)
        assert pred.shape == (eps.size - 4,) and np.all(pred > 0)
        assert est.transform(eps).shape == eps.shape
        assert np.isfinite(est.score(eps))

    def test_deterministic(self, eps):
        a = NeuralGarch(max_epochs=4).fit(eps).predict(eps)
        b = NeuralGarch(max_epochs=4).fit(eps).predict(eps)
        np.testing.assert_array_equal(a, b)

    def test_grid_records_rate(self, eps):
        est = NeuralGarch(grid=True, max_epochs=1).fit(eps)
        assert est.lr_ > 0

    def test_figarch_multistart(self, eps):
        est = NeuralGarch(model="figarch", truncation=16, multistart=True, max_epochs=2).fit(eps)
        assert est.fitted_.model.weights_feasible(est.values_)

    def test_too_short(self):
        with pytest.raises(DataError):
            NeuralGarch().fit(np.ones(10))
