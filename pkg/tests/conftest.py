import datetime as dt

import numpy as np
import pytest

from roughvol.fbm import simulate_fbm
from roughvol.market_data import OhlcBar, OhlcSeries, VolSeries
from roughvol.simulate import sim_dates


@pytest.fixture
def tiny_ohlc() -> OhlcSeries:
    bars = [
        OhlcBar(dt.date(2020, 1, 6), 100.0, 102.0, 99.0, 101.0),
        OhlcBar(dt.date(2020, 1, 7), 101.0, 103.5, 100.5, 103.0),
        OhlcBar(dt.date(2020, 1, 8), 103.0, 103.0, 101.0, 101.5),
    ]
    return OhlcSeries.from_bars("TINY", bars)


def vol_series_from_logvol(log_vol: np.ndarray, ticker: str = "SIM", proxy: str = "SimulatedTruth") -> VolSeries:
    return VolSeries(ticker, proxy, sim_dates(len(log_vol)), np.exp(log_vol))


def exp_fbm_series(n: int, hurst: float, nu: float, seed: int) -> VolSeries:
    w = simulate_fbm(n, hurst, seed=seed).values
    return vol_series_from_logvol(nu * w)


def weekday_dates(start: dt.date, count: int) -> list[dt.date]:
    out = []
    day = start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out
