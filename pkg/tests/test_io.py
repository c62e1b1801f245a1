import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from garchnn import io as gio
from garchnn.exceptions import DataError
from garchnn.timeseries import ReturnSeries
from garchnn.validation import check_horizons, check_positive_int, check_ratios, check_returns

finite = st.floats(allow_nan=False, allow_infinity=False)


class TestParamsDocument:
    @given(st.dictionaries(st.from_regex(r"[a-z_]{1,8}", fullmatch=True), finite, min_size=1, max_size=6))
    def test_round_trip_is_exact(self, values):
        import tempfile

        with tempfile.TemporaryDirectory() as d:
            path = gio.write_params(os.path.join(d, "p.params"), "gjr", values, {"seed": 3, "note": "x"})
            kind, back, meta = gio.read_params(path)
        assert kind == "gjr"
        assert back == values
        assert meta == {"seed": 3, "note": "x"}

    def test_layout(self, tmp_path):
        path = gio.write_params(tmp_path / "a.params", "garch11", {"omega": 0.1}, {"fixed.w": 0.0})
        assert path.read_text() == "kind = garch11\nfixed.w = 0.0\nparam.omega = 0.1\n"

    def test_missing_kind(self, tmp_path):
        p = tmp_path / "bad.params"
        p.write_text("param.omega = 1\n")
        with pytest.raises(DataError):
            gio.read_params(p)

    @pytest.mark.parametrize("text", ["kind = a\nno equals\n", "kind = a\nkind = b\n"])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "bad.params"
        p.write_text(text)
        with pytest.raises(DataError):
            gio.read_config(p)

    def test_comments_and_types(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# header\n\nlr = 0.01\nmax_epochs = 5\nbatch = full\nuse = true\nh = 1,5\n")
        assert gio.read_config(p) == {"lr": 0.01, "max_epochs": 5, "batch": "full", "use": True, "h": (1, 5)}


class TestValues:
    @given(finite)
    def test_float_round_trip(self, x):
        assert gio.parse_value(gio.format_value(x)) == x

    def test_numpy_scalars(self):
        assert gio.format_value(np.float64(0.5)) == "0.5"
        assert gio.format_value(np.int64(3)) == "3"
        assert gio.format_value(False) == "false"


class TestAtomicWrite:
    def test_creates_parents_and_leaves_no_temp(self, tmp_path):
        path = gio.atomic_write(tmp_path / "a" / "b.txt", "hello")
        assert path.read_text() == "hello"
        assert os.listdir(path.parent) == ["b.txt"]

    def test_failure_keeps_old_content(self, tmp_path):
        path = gio.atomic_write(tmp_path / "x.txt", "old")
        with pytest.raises(TypeError):
            gio.atomic_write(path, 123)
        assert path.read_text() == "old"
        assert os.listdir(tmp_path) == ["x.txt"]


class TestTable:
    def test_round_trip(self, tmp_path):
        rows = [[1, 0.1, "a"], [2, 1e-300, "b"]]
        gio.write_table(tmp_path / "t.csv", ["i", "x", "s"], rows)
        header, back = gio.read_table(tmp_path / "t.csv")
        assert header == ["i", "x", "s"] and back == rows

    def test_tab_delimited_and_pandas(self, tmp_path):
        gio.write_table(tmp_path / "t.tsv", ["a", "b"], [[1, 2.5]], delimiter="\t")
        frame = pd.read_csv(tmp_path / "t.tsv", sep="\t")
        assert frame.to_dict("list") == {"a": [1], "b": [2.5]}


class TestValidation:
    def test_returns_accepts_shapes(self):
        x = np.arange(5.0)
        for X in (x, x[:, None], pd.Series(x), pd.DataFrame({"r": x}), ReturnSeries.from_array(x), list(x)):
            np.testing.assert_array_equal(check_returns(X), x)

    @pytest.mark.parametrize("X", [np.ones((3, 2)), [1.0], [1.0, np.nan], ["a", "b"]])
    def test_returns_rejects(self, X):
        with pytest.raises(DataError):
            check_returns(X)

    def test_ints_and_horizons(self):
        assert check_positive_int(3.0, "k") == 3
        for bad in (0, 1.5, True, -2):
            with pytest.raises(ValueError):
                check_positive_int(bad, "k")
        assert check_horizons([1, 5]) == (1, 5)
        for bad in ([], [1, 1]):
            with pytest.raises(ValueError):
                check_horizons(bad)

    def test_ratios(self):
        assert check_ratios([8, 1, 1]) == (8.0, 1.0, 1.0)
        for bad in ([1, 1], [1, 0, 1]):
            with pytest.raises(ValueError):
                check_ratios(bad)
