import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from garchnn.exceptions import DataError
from garchnn.timeseries import (
    PriceSeries,
    ReturnSeries,
    build_dataset,
    load_prices,
    log_returns,
    read_dataset,
    realized_volatility,
    split,
    write_dataset,
)


def _csv(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _prices(closes):
    days = np.datetime64("2020-01-01") + np.arange(len(closes))
    return PriceSeries(days, np.asarray(closes, dtype=float))


finite_returns = arrays(np.float64, st.integers(12, 80), elements=st.floats(-20, 20, allow_nan=False))


class TestLoadPrices:
    def test_two_rows(self, tmp_path):
        ps = load_prices(_csv(tmp_path, "date,close\n2020-01-01,100.0\n2020-01-02,101.0\n"))
        assert len(ps) == 2
        assert ps.closes.tolist() == [100.0, 101.0]

    def test_sorts_rows(self, tmp_path):
        ps = load_prices(_csv(tmp_path, "date,close\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n"))
        assert ps.closes.tolist() == [1.0, 2.0, 3.0]
        assert np.all(np.diff(ps.timestamps.astype(int)) > 0)

    def test_zero_price_rejected(self, tmp_path):
        with pytest.raises(DataError, match="non-positive price"):
            load_prices(_csv(tmp_path, "date,close\n2020-01-01,100\n2020-01-02,0\n"))

    def test_duplicate_date_rejected(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            load_prices(_csv(tmp_path, "date,close\n2020-01-01,100\n2020-01-01,101\n"))

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataError, match="close"):
            load_prices(_csv(tmp_path, "date,price\n2020-01-01,100\n2020-01-02,101\n"))

    def test_column_map_and_semicolons(self, tmp_path):
        p = _csv(tmp_path, "Day;Adj Close\n2020-01-01;10\n2020-01-02;11\n")
        ps = load_prices(p, {"date": "Day", "close": "Adj Close"})
        assert ps.closes.tolist() == [10.0, 11.0]

    def test_bad_number(self, tmp_path):
        with pytest.raises(DataError, match="unparseable"):
            load_prices(_csv(tmp_path, "date,close\n2020-01-01,abc\n2020-01-02,1\n"))


class TestLogReturns:
    def test_flat_price(self):
        assert log_returns(_prices([100, 100])).returns.tolist() == [0.0]

    def test_one_percent(self):
        r = log_returns(_prices([100, 100 * math.exp(0.01)])).returns
        assert r[0] == pytest.approx(1.0, abs=1e-12)

    def test_halving(self):
        # 100 * ln(1/2) from a reference value of ln 2 = 0.69314718055994530942
        r = log_returns(_prices([100, 50])).returns
        assert r[0] == pytest.approx(-69.314718055994530942, abs=1e-10)

    @given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=40))
    def test_length_and_telescoping(self, closes):
        r = log_returns(_prices(closes), scale=1.0)
        assert len(r) == len(closes) - 1
        assert r.returns.sum() == pytest.approx(math.log(closes[-1] / closes[0]), abs=1e-9)


class TestRealizedVolatility:
    def test_zero_returns(self):
        vol = realized_volatility(ReturnSeries.from_array(np.zeros(8)), 5)
        assert np.all(vol.sigma == 0)

    def test_five_ones(self):
        vol = realized_volatility(ReturnSeries.from_array(np.ones(5)), 5)
        assert vol.sigma.tolist() == pytest.approx([2.2360680], abs=1e-7)

    def test_three_four_five(self):
        vol = realized_volatility(ReturnSeries.from_array([3.0, 4.0]), 2)
        assert vol.sigma.tolist() == [5.0]

    def test_window_longer_than_series(self):
        with pytest.raises(DataError):
            realized_volatility(ReturnSeries.from_array([1.0, 2.0]), 5)

    @given(finite_returns, st.integers(1, 10))
    def test_invariants(self, eps, k):
        vol = realized_volatility(ReturnSeries.from_array(eps), k)
        assert len(vol) == eps.size - k + 1
        assert np.all(vol.sigma >= 0)
        np.testing.assert_allclose(vol.sigma_sq, vol.sigma**2)
        # direct loop reference
        ref = [sum(x * x for x in eps[t - k + 1 : t + 1]) for t in range(k - 1, eps.size)]
        np.testing.assert_allclose(vol.sigma_sq, ref, rtol=1e-12, atol=1e-12)


class TestDataset:
    def _series(self, n, seed=0):
        return ReturnSeries.from_array(np.random.default_rng(seed).standard_normal(n))

    def test_anchor_enumeration(self):
        rs = self._series(10)
        ds = build_dataset(rs, realized_volatility(rs, 5), 5, 1)
        assert len(ds) == 5
        assert ds.anchors.tolist() == [4, 5, 6, 7, 8]

    def test_k1_h1(self):
        rs = self._series(3)
        assert len(build_dataset(rs, realized_volatility(rs, 1), 1, 1)) == 2

    def test_horizon_too_long(self):
        rs = self._series(6)
        with pytest.raises(DataError):
            build_dataset(rs, realized_volatility(rs, 5), 5, 3)

    @given(finite_returns, st.integers(1, 6), st.integers(1, 5))
    def test_record_contents(self, eps, k, h):
        rs = ReturnSeries.from_array(eps)
        if eps.size - k < h:
            return
        ds = build_dataset(rs, realized_volatility(rs, k), k, h)
        assert np.all(np.diff(ds.anchors) > 0)
        for w, y, t in zip(ds.windows, ds.targets, ds.anchors):
            assert t - k + 1 >= 0 and t + h < eps.size
            np.testing.assert_array_equal(w, eps[t - k + 1 : t + 1])
            assert y == pytest.approx(np.sum(eps[t + h - k + 1 : t + h + 1] ** 2), rel=1e-12, abs=1e-12)

    def test_round_trip_file(self, tmp_path):
        rs = self._series(30)
        ds = build_dataset(rs, realized_volatility(rs, 5), 5, 2)
        write_dataset(ds, tmp_path / "ds.txt")
        back = read_dataset(tmp_path / "ds.txt")
        np.testing.assert_array_equal(back["anchors"], ds.anchors)
        np.testing.assert_array_equal(back["targets"], ds.targets)


class TestSplit:
    def _ds(self, n_records, k=1, h=1):
        rs = ReturnSeries.from_array(np.random.default_rng(1).standard_normal(n_records + k - 1 + h))
        return build_dataset(rs, realized_volatility(rs, k), k, h)

    @pytest.mark.parametrize("n, sizes", [(100, (80, 10, 10)), (10, (8, 1, 1))])
    def test_sizes(self, n, sizes):
        assert split(self._ds(n)).sizes == sizes

    def test_too_small(self):
        with pytest.raises(DataError):
            split(self._ds(2))

    @settings(max_examples=40)
    @given(st.integers(10, 400))
    def test_partition_is_contiguous(self, n):
        sp = split(self._ds(n))
        joined = np.concatenate([sp.train.anchors, sp.val.anchors, sp.test.anchors])
        np.testing.assert_array_equal(joined, self._ds(n).anchors)
        assert sp.train.anchors[-1] < sp.val.anchors[0] < sp.test.anchors[0]
        assert abs(len(sp.train) / n - 0.8) <= 1 / n + 1e-12
