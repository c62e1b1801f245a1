import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from garchnn import garch, nn
from garchnn.exceptions import DataError, LeakageError
from garchnn.pipeline import prepare
from garchnn.timeseries import ReturnSeries
from garchnn.training import (
    AdamState,
    TrainConfig,
    TrainedModel,
    adam_step,
    check_leakage,
    grid_search,
    purge_overlap,
    record_terms,
    train,
)


@pytest.fixture(scope="module")
def sim_data():
    eps = garch.simulate(garch.Garch11Params(0.1, 0.15, 0.75), 1500, seed=3)
    return prepare(ReturnSeries.from_array(eps), k=5, h=1)


class TestAdam:
    @given(arrays(np.float64, 4, elements=st.floats(-10, 10).filter(lambda g: abs(g) > 1e-3)))
    def test_first_step_size(self, g):
        new, _ = adam_step(np.zeros(4), g, AdamState.zeros(4), 0.01)
        np.testing.assert_allclose(np.abs(new), 0.01, rtol=1e-4)
        assert np.all(np.sign(new) == -np.sign(g))

    def test_zero_gradient(self):
        x = np.array([1.0, -2.0])
        new, state = adam_step(x, np.zeros(2), AdamState.zeros(2), 0.1)
        np.testing.assert_array_equal(new, x)
        assert state.t == 1

    def test_two_steps_hand_moments(self):
        g = np.array([2.0])
        x1, s1 = adam_step(np.zeros(1), g, AdamState.zeros(1), 0.1)
        x2, s2 = adam_step(x1, g, s1, 0.1)
        # m2 = (1 - 0.9^2) g, v2 = (1 - 0.999^2) g^2; both bias corrections give back g and g^2
        assert s2.m[0] == pytest.approx(0.19 * 2.0)
        assert s2.v[0] == pytest.approx(0.001999 * 4.0)
        assert x2[0] == pytest.approx(-2 * 0.1 * 2.0 / (2.0 + 1e-8))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1)


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"lr": 0.0}, {"plateau_patience": 0}, {"batch": "huge"}, {"monitor": "test"}, {"loss": "t_loss", "dof": 2.0}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


class TestRecordTerms:
    def test_hand_example(self):
        eps = np.arange(1.0, 11.0)  # squares 1, 4, ..., 100
        known, unknown = record_terms(eps, np.array([4]), 2, 5)
        # target window days 2..6; known 2..4, unknown 5..6
        assert known[0] == 9 + 16 + 25
        assert unknown[0] == 36 + 49

    def test_long_horizon_has_no_known_part(self):
        eps = np.ones(30)
        known, unknown = record_terms(eps, np.array([4, 10]), 8, 5)
        np.testing.assert_array_equal(known, 0.0)
        np.testing.assert_array_equal(unknown, 5.0)

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 1000))
    def test_parts_sum_to_target(self, k, h, seed):
        eps = np.random.default_rng(seed).standard_normal(40)
        anchors = np.arange(k - 1, 40 - h)
        known, unknown = record_terms(eps, anchors, h, k)
        full = [np.sum(eps[t + h - k + 1 : t + h + 1] ** 2) for t in anchors]
        np.testing.assert_allclose(known + unknown, full, rtol=1e-12)


class TestLeakage:
    def test_guard(self, sim_data):
        first = int(sim_data.test.anchors[0])
        check_leakage(first, sim_data.test)
        with pytest.raises(LeakageError):
            check_leakage(first + 1, sim_data.test)

    @pytest.mark.parametrize("h", [1, 5, 21])
    def test_purged_targets_end_before_test(self, h):
        eps = np.random.default_rng(0).standard_normal(800)
        data = prepare(ReturnSeries.from_array(eps), 5, h)
        train_ds, val_ds = purge_overlap(data)
        first = int(data.test.anchors[0])
        assert train_ds.anchors[-1] + h <= first and val_ds.anchors[-1] + h <= first

    def test_nothing_left(self):
        eps = np.random.default_rng(0).standard_normal(60)
        with pytest.raises(DataError):
            purge_overlap(prepare(ReturnSeries.from_array(eps), 5, 21))


class TestTrain:
    def test_zero_epochs(self, sim_data):
        model = nn.CounterpartModel("garch11")
        fitted, hist = train(model, sim_data, TrainConfig(max_epochs=0))
        assert len(hist) == 0
        init_var = fitted.init_var
        for k, v in model.default_values(init_var).items():
            assert fitted.values[k] == pytest.approx(v, rel=1e-12)

    def test_recovers_and_tracks_best(self, sim_data):
        cfg = TrainConfig(lr=0.05, max_epochs=100, loss="n_loss", monitor="train", tol=1e-7)
        fitted, hist = train(nn.CounterpartModel("garch11"), sim_data, cfg)
        truth = {"omega": 0.1, "alpha": 0.15, "beta": 0.75}
        for k, v in truth.items():
            assert (fitted.values[k] - v) ** 2 < 0.05
        assert hist.best_score == min(hist.train_loss)
        assert hist.train_loss[-1] < hist.train_loss[0]

    def test_val_monitor_keeps_minimum(self, sim_data):
        fitted, hist = train(nn.CounterpartModel("gjr"), sim_data, TrainConfig(lr=0.02, max_epochs=30))
        assert hist.best_val == min(hist.val_loss)
        assert hist.val_loss[hist.best_epoch] == hist.best_val

    def test_plateau_halves_rate(self, sim_data):
        _, hist = train(nn.CounterpartModel("garch11"), sim_data,
                        TrainConfig(lr=0.3, max_epochs=60, plateau_patience=2, early_stop_patience=50))
        ratios = {round(b / a, 12) for a, b in zip(hist.lr, hist.lr[1:])}
        assert ratios <= {1.0, 0.5}

    def test_deterministic(self, sim_data):
        cfg = TrainConfig(max_epochs=8, batch="minibatch")
        a = train(nn.GarchLSTM("garch11"), sim_data, cfg)
        b = train(nn.GarchLSTM("garch11"), sim_data, cfg)
        assert a[1].rows() == b[1].rows()
        assert a[0].values == b[0].values

    def test_horizon_mismatch(self, sim_data):
        with pytest.raises(ValueError):
            train(nn.CounterpartModel("garch11"), sim_data, TrainConfig(horizon=3))

    def test_figarch_stays_feasible(self, sim_data):
        model = nn.CounterpartModel("figarch", truncation=32)
        fitted, _ = train(model, sim_data, TrainConfig(lr=0.05, max_epochs=15, loss="n_loss"))
        assert model.weights_feasible(fitted.values)
        assert np.all(fitted.variance_path(sim_data.returns.returns) > 0)

    def test_grid_search_picks_best(self, sim_data):
        cfg = TrainConfig(max_epochs=5)
        fitted, hist, lr = grid_search(nn.CounterpartModel("garch11"), sim_data, cfg, lrs=(1e-3, 3e-2))
        others = [train(nn.CounterpartModel("garch11"), sim_data, TrainConfig(max_epochs=5, lr=x))[1].best_val
                  for x in (1e-3, 3e-2)]
        assert hist.best_val == min(others)
        assert lr in (1e-3, 3e-2)


class TestTrainedModel:
    def test_one_step_is_variance_path(self):
        eps = np.random.default_rng(1).standard_normal(100)
        tm = TrainedModel(nn.CounterpartModel("gjr"), {"omega": 0.1, "alpha": 0.05, "lambda_asym": 0.1, "beta": 0.8},
                          1.0, 0, 1, 1)
        anchors = np.arange(10, 90)
        np.testing.assert_array_equal(tm.one_step(eps, anchors), tm.variance_path(eps)[anchors + 1])
        np.testing.assert_allclose(tm.forecast_realized(eps, anchors), tm.one_step(eps, anchors), rtol=1e-15)

    def test_direct_scaling(self):
        eps = np.random.default_rng(2).standard_normal(100)
        vals = {"omega": 0.1, "alpha": 0.1, "beta": 0.8}
        one = TrainedModel(nn.CounterpartModel("garch11"), vals, 1.0, 0, 5, 1)
        three = TrainedModel(nn.CounterpartModel("garch11"), vals, 1.0, 0, 5, 3)
        anchors = np.arange(10, 90)
        np.testing.assert_allclose(three.forecast_unknown(eps, anchors), 3 * one.forecast_unknown(eps, anchors))
