"""Daily variance proxies from OHLC range data, and estimator comparisons.

All estimators target the squared daily volatility of a driftless intraday
geometric Brownian motion.  Volatility is the plain square root of the
variance proxy; no small-sample bias correction is applied.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .market_data import OhlcBar, OhlcSeries, VolProxy, VolSeries, register_report

log = logging.getLogger("roughvol")

PARKINSON_CONST = 1.0 / (4.0 * np.log(2.0))
GK_CROSS_CONST = 2.0 * np.log(2.0) - 1.0


def close_to_close_var(prev_close: float, close: float) -> float:
    """Squared log return between consecutive closes."""
    if prev_close <= 0 or close <= 0:
        raise ValueError("prices must be positive")
    return float(np.log(close / prev_close) ** 2)


def parkinson_var(bar: OhlcBar) -> float:
    """(1 / 4 ln 2) * ln(high/low)^2."""
    return float(PARKINSON_CONST * np.log(bar.high / bar.low) ** 2)


def garman_klass_practical_var(bar: OhlcBar) -> float:
    """0.5 ln(high/low)^2 - (2 ln 2 - 1) ln(close/open)^2.

    Can go negative when the open-to-close move dominates the range; callers
    building volatility series clamp such days to zero and drop them.
    """
    return float(
        0.5 * np.log(bar.high / bar.low) ** 2
        - GK_CROSS_CONST * np.log(bar.close / bar.open) ** 2
    )


def garman_klass_full_var(bar: OhlcBar) -> float:
    """The 0.511 / 0.019 / 0.383 combination of range, cross and return terms."""
    u = np.log(bar.high / bar.open)
    d = np.log(bar.low / bar.open)
    c = np.log(bar.close / bar.open)
    return float(0.511 * (u - d) ** 2 - 0.019 * (c * (u + d) - 2.0 * u * d) - 0.383 * c**2)


def rogers_satchell_var(bar: OhlcBar) -> float:
    """Drift-independent u(u - c) + d(d - c); nonnegative for valid bars."""
    u = np.log(bar.high / bar.open)
    d = np.log(bar.low / bar.open)
    c = np.log(bar.close / bar.open)
    return float(u * (u - c) + d * (d - c))


# Vectorized forms on log-price arrays.  The simulation pipeline works in
# log space throughout (extreme vol-of-vol experiments overflow price space),
# so each estimator is defined once on (log O, log H, log L, log C).

def variances_from_logs(proxy: VolProxy, lo: np.ndarray, lh: np.ndarray, ll: np.ndarray, lc: np.ndarray, prev_lc: np.ndarray | None = None) -> np.ndarray:
    rng_ = lh - ll
    u = lh - lo
    d = ll - lo
    c = lc - lo
    if proxy is VolProxy.PARKINSON:
        return PARKINSON_CONST * rng_**2
    if proxy is VolProxy.GARMAN_KLASS_PRACTICAL:
        return 0.5 * rng_**2 - GK_CROSS_CONST * c**2
    if proxy is VolProxy.GARMAN_KLASS_FULL:
        return 0.511 * rng_**2 - 0.019 * (c * (u + d) - 2.0 * u * d) - 0.383 * c**2
    if proxy is VolProxy.ROGERS_SATCHELL:
        return u * (u - c) + d * (d - c)
    if proxy is VolProxy.CLOSE_TO_CLOSE:
        if prev_lc is None:
            raise ValueError("close-to-close needs previous closes")
        return (lc - prev_lc) ** 2
    raise ValueError(f"{proxy.value} is not computable from OHLC bars")


def proxy_series(series: OhlcSeries, proxy: VolProxy | str, close_to_open: bool = False) -> VolSeries:
    """Per-day volatility series for one estimator.

    Days whose variance proxy is zero (or negative, for the practical
    Garman-Klass) have no log-volatility and are dropped with a warning.
    For the close-to-close proxy the first day has no predecessor and the
    series is one shorter, unless ``close_to_open`` selects the same-day
    open-to-close return.
    """
    proxy = VolProxy(proxy)
    lo, lh = np.log(series.open), np.log(series.high)
    ll, lc = np.log(series.low), np.log(series.close)
    dates = series.dates
    if proxy is VolProxy.CLOSE_TO_CLOSE and not close_to_open:
        var = (lc[1:] - lc[:-1]) ** 2
        dates = dates[1:]
    elif proxy is VolProxy.CLOSE_TO_CLOSE:
        var = (lc - lo) ** 2
    else:
        var = variances_from_logs(proxy, lo, lh, ll, lc)
    keep = var > 0.0
    dropped = int(np.sum(~keep))
    if dropped:
        log.warning("%s/%s: dropped %d day(s) with non-positive variance proxy", series.ticker, proxy.value, dropped)
    return VolSeries(series.ticker, proxy, dates[keep], np.sqrt(var[keep]))


@register_report("roughvol.proxy_comparison/v1")
@dataclass
class ProxyComparison:
    """Estimator-vs-benchmark error measures over the date overlap."""

    ticker: str
    proxy: str
    benchmark: str
    mse: float
    mad: float
    prop_bias: float
    std_dev: float
    n_overlap: int
    efficiency: float | None = None


def compare_to_benchmark(estimated: VolSeries, benchmark: VolSeries, close_to_close: VolSeries | None = None) -> ProxyComparison:
    """MSE / MAD / proportional bias of ``estimated`` against ``benchmark``.

    ``std_dev`` is the standard deviation of the estimated series over the
    overlap (the benchmark-independent dispersion of the estimator).  When a
    close-to-close series is supplied, the classical efficiency ratio of the
    variance proxies over their common dates is attached as well.
    """
    _, ie, ib = np.intersect1d(estimated.dates, benchmark.dates, return_indices=True)
    if len(ie) < 2:
        raise ValueError(f"need at least 2 overlapping dates, got {len(ie)}")
    est = estimated.values[ie]
    ben = benchmark.values[ib]
    eff = None
    if close_to_close is not None:
        _, je, jc = np.intersect1d(estimated.dates, close_to_close.dates, return_indices=True)
        if len(je) >= 2:
            eff = efficiency(estimated.values[je] ** 2, close_to_close.values[jc] ** 2)
    return ProxyComparison(
        ticker=estimated.ticker,
        proxy=estimated.proxy.value,
        benchmark=benchmark.proxy.value,
        mse=float(np.mean((est - ben) ** 2)),
        mad=float(np.mean(np.abs(est - ben))),
        prop_bias=float(np.mean(est / ben - 1.0)),
        std_dev=float(np.std(est, ddof=1)),
        n_overlap=int(len(ie)),
        efficiency=eff,
    )


def efficiency(candidate_var: np.ndarray, cc_var: np.ndarray) -> float:
    """Var(close-to-close variance) / Var(candidate variance).

    Both inputs are same-length daily *variance* series; the squared-return
    estimator scores 1 by construction.
    """
    candidate_var = np.asarray(candidate_var, dtype=float)
    cc_var = np.asarray(cc_var, dtype=float)
    if candidate_var.shape != cc_var.shape or candidate_var.size < 2:
        raise ValueError("need two same-length variance series with >= 2 points")
    denom = np.var(candidate_var, ddof=1)
    if denom == 0.0:
        raise ValueError("candidate variance series is constant")
    return float(np.var(cc_var, ddof=1) / denom)
