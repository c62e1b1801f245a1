"""Regenerate the bundled price fixture (GJR shocks with Student-t innovations)."""

from pathlib import Path

import numpy as np
import pandas as pd

from garchnn import garch

OUT = Path(__file__).resolve().parents[1] / "src" / "garchnn" / "data" / "fixture_prices.csv"


def main(n_days: int = 600, seed: int = 7) -> None:
    params = garch.GjrParams(omega=0.05, alpha=0.05, lambda_asym=0.1, beta=0.85)
    eps = garch.simulate(params, n_days - 1, seed=seed, dist="t", dof=6.0)
    close = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(eps / 100.0)]))
    dates = pd.bdate_range("2016-01-04", periods=n_days)
    frame = pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "close": np.round(close, 4)})
    frame.to_csv(OUT, index=False, lineterminator="\n")


if __name__ == "__main__":
    main()
