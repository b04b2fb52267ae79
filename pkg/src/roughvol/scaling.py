"""Moment scaling of log-volatility and Hurst-exponent estimation.

The central object is the surface m(q, delta): the mean of |log sigma_{t+delta}
- log sigma_t|^q over every pair of observations exactly ``delta`` calendar
days apart (rolling window, so weekend gaps contribute to the 3-day lag, not
the 1-day one).  Power-law behaviour m ~ K_q delta^(q H) is fitted per q by
OLS in log-log coordinates, and H by a zero-intercept regression of the
slopes zeta_q on q.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .market_data import VolSeries, register_report, _atomic_write_text

DEFAULT_Q_GRID = (0.5, 1.0, 1.5, 2.0, 3.0)
DEFAULT_MAX_LAG = 410
DEFAULT_MIN_PAIRS = 30


class ScalingError(ValueError):
    """Raised when a scaling fit is infeasible or degenerate."""


@register_report("roughvol.scaling_report/v1")
@dataclass
class ScalingReport:
    """m(q, delta) surface with per-q power-law fits and the Hurst estimate."""

    ticker: str
    proxy: str
    q_grid: np.ndarray
    lag_grid: np.ndarray
    m_surface: np.ndarray      # shape (len(q_grid), len(lag_grid)), NaN where no pairs
    pair_counts: np.ndarray    # per-lag number of increment pairs
    zeta: np.ndarray           # per-q log-log slope
    log_kq: np.ndarray         # per-q log-log intercept, ln K_q
    r_squared: np.ndarray      # per-q fit quality
    hurst: float
    min_pairs: int = DEFAULT_MIN_PAIRS

    @classmethod
    def from_payload(cls, payload: dict) -> "ScalingReport":
        arrays = {
            "q_grid": float, "lag_grid": int, "m_surface": float,
            "pair_counts": int, "zeta": float, "log_kq": float, "r_squared": float,
        }
        kw = dict(payload)
        for name, dtype in arrays.items():
            kw[name] = np.asarray(kw[name], dtype=dtype)
        return cls(**kw)

    def fitted_lags(self) -> np.ndarray:
        """Lags that actually entered the regressions."""
        return self.lag_grid[self.pair_counts >= self.min_pairs]


@register_report("roughvol.increment_histogram/v1")
@dataclass
class IncrementHistogram:
    """Histogram of lag-``lag`` log-volatility increments plus Gaussian fits.

    ``normal_fit`` is (mean, std) of the increments at this lag;
    ``rescaled_fit`` is the 1-day fit scaled by lag^hurst, which should
    overlay ``normal_fit`` under fBm self-similarity.
    """

    ticker: str
    proxy: str
    lag: int
    bin_edges: np.ndarray
    counts: np.ndarray
    normal_fit: tuple[float, float]
    rescaled_fit: tuple[float, float]
    hurst: float

    @classmethod
    def from_payload(cls, payload: dict) -> "IncrementHistogram":
        kw = dict(payload)
        kw["bin_edges"] = np.asarray(kw["bin_edges"], dtype=float)
        kw["counts"] = np.asarray(kw["counts"], dtype=int)
        kw["normal_fit"] = tuple(kw["normal_fit"])
        kw["rescaled_fit"] = tuple(kw["rescaled_fit"])
        return cls(**kw)


def _increments_at_lags(day_offsets: np.ndarray, log_values: np.ndarray, lags: np.ndarray):
    """Yield (lag, increments) using a presence array over the calendar span."""
    span = int(day_offsets[-1]) if len(day_offsets) else 0
    pos = np.full(span + 1, -1, dtype=np.int64)
    pos[day_offsets] = np.arange(len(day_offsets))
    for lag in lags:
        lag = int(lag)
        if lag < 1 or lag > span:
            yield lag, np.empty(0)
            continue
        a = pos[: span + 1 - lag]
        b = pos[lag:]
        ok = (a >= 0) & (b >= 0)
        yield lag, log_values[b[ok]] - log_values[a[ok]]


def log_vol_increments(series: VolSeries, lag: int) -> np.ndarray:
    """All log sigma differences between observations exactly ``lag`` days apart."""
    if len(series) < 2:
        raise ScalingError("need at least 2 observations")
    _, inc = next(_increments_at_lags(series.day_offsets(), series.log_values(), np.array([lag])))
    return inc


def m_of_q_delta(series: VolSeries, q: float, lag: int) -> float:
    """Mean of |log-vol increments|^q over all calendar-matched pairs."""
    inc = log_vol_increments(series, lag)
    if len(inc) == 0:
        raise ScalingError(f"no pairs at lag {lag}")
    return float(np.mean(np.abs(inc) ** q))


def _ols_loglog(log_x: np.ndarray, log_y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept, R^2 of y on x (both already in logs)."""
    x = log_x - log_x.mean()
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ScalingError("degenerate regression: single distinct lag")
    slope = float(x @ log_y) / sxx
    intercept = float(log_y.mean() - slope * log_x.mean())
    resid = log_y - slope * log_x - intercept
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return slope, intercept, r2


def fit_scaling(
    series: VolSeries,
    q_grid=DEFAULT_Q_GRID,
    lag_grid=None,
    min_pairs: int = DEFAULT_MIN_PAIRS,
) -> ScalingReport:
    """Fit m(q, delta) ~ K_q delta^zeta_q and extract H.

    ``lag_grid`` defaults to 1..410 capped at the series span.  Lags with
    fewer than ``min_pairs`` matched pairs are excluded from the regressions
    (their m values are still reported).  H is the zero-intercept OLS slope
    of zeta_q on q.
    """
    q_grid = np.asarray(sorted(q_grid), dtype=float)
    if np.any(q_grid <= 0):
        raise ScalingError("q values must be positive")
    offsets = series.day_offsets()
    logv = series.log_values()
    span = int(offsets[-1]) if len(offsets) else 0
    if lag_grid is None:
        lag_grid = np.arange(1, min(DEFAULT_MAX_LAG, max(span, 1)) + 1)
    lag_grid = np.asarray(sorted(set(int(l) for l in lag_grid)), dtype=int)
    if np.any(lag_grid < 1):
        raise ScalingError("lags must be >= 1 day")

    m_surface = np.full((len(q_grid), len(lag_grid)), np.nan)
    counts = np.zeros(len(lag_grid), dtype=int)
    for j, (lag, inc) in enumerate(_increments_at_lags(offsets, logv, lag_grid)):
        counts[j] = len(inc)
        if len(inc):
            a = np.abs(inc)
            m_surface[:, j] = [np.mean(a**q) for q in q_grid]

    used = counts >= min_pairs
    if used.sum() < 5:
        raise ScalingError(
            f"need >= 5 lags with at least {min_pairs} pairs, got {int(used.sum())}"
        )
    if np.any(m_surface[:, used] <= 0.0):
        raise ScalingError("m(q, delta) vanished on fitted lags (constant series?)")

    log_lag = np.log(lag_grid[used].astype(float))
    zeta = np.empty(len(q_grid))
    log_kq = np.empty(len(q_grid))
    r_squared = np.empty(len(q_grid))
    for i in range(len(q_grid)):
        zeta[i], log_kq[i], r_squared[i] = _ols_loglog(log_lag, np.log(m_surface[i, used]))
    hurst = float((q_grid @ zeta) / (q_grid @ q_grid))

    return ScalingReport(
        ticker=series.ticker,
        proxy=series.proxy.value,
        q_grid=q_grid,
        lag_grid=lag_grid,
        m_surface=m_surface,
        pair_counts=counts,
        zeta=zeta,
        log_kq=log_kq,
        r_squared=r_squared,
        hurst=hurst,
        min_pairs=int(min_pairs),
    )


def split_period_hurst(series: VolSeries, q_grid=DEFAULT_Q_GRID, lag_grid=None, min_pairs: int = DEFAULT_MIN_PAIRS) -> tuple[float, float, float]:
    """H on the whole series and on each contiguous half (same lag grid)."""
    if len(series) < 200:
        raise ScalingError(f"need >= 200 observations to split, got {len(series)}")
    half = len(series) // 2
    full = fit_scaling(series, q_grid, lag_grid, min_pairs)
    first = fit_scaling(_slice(series, 0, half), q_grid, lag_grid, min_pairs)
    second = fit_scaling(_slice(series, half, len(series)), q_grid, lag_grid, min_pairs)
    return full.hurst, first.hurst, second.hurst


def _slice(series: VolSeries, i0: int, i1: int) -> VolSeries:
    return VolSeries(series.ticker, series.proxy, series.dates[i0:i1], series.values[i0:i1])


def increment_distribution(series: VolSeries, lag: int, hurst: float) -> IncrementHistogram:
    """Histogram + Gaussian fit of lag-``lag`` increments, with the
    delta^H-rescaled 1-day fit for the self-similarity overlay."""
    inc = log_vol_increments(series, lag)
    if len(inc) < 100:
        raise ScalingError(f"need >= 100 increments at lag {lag}, got {len(inc)}")
    day1 = log_vol_increments(series, 1)
    if len(day1) < 2:
        raise ScalingError("need 1-day increments for the rescaled fit")
    counts, edges = np.histogram(inc, bins="auto")
    scale = float(lag) ** hurst
    return IncrementHistogram(
        ticker=series.ticker,
        proxy=series.proxy.value,
        lag=int(lag),
        bin_edges=edges,
        counts=counts,
        normal_fit=(float(np.mean(inc)), float(np.std(inc, ddof=1))),
        rescaled_fit=(float(np.mean(day1)) * scale, float(np.std(day1, ddof=1)) * scale),
        hurst=float(hurst),
    )


def slope_on_lag_range(report: ScalingReport, q: float, lag_lo: int, lag_hi: int) -> float:
    """OLS slope of log m(q, .) on log delta restricted to [lag_lo, lag_hi]."""
    qi = int(np.argmin(np.abs(report.q_grid - q)))
    if abs(report.q_grid[qi] - q) > 1e-9:
        raise ScalingError(f"q={q} not in report grid {report.q_grid}")
    sel = (report.lag_grid >= lag_lo) & (report.lag_grid <= lag_hi) & (report.pair_counts > 0)
    m = report.m_surface[qi, sel]
    sel_lags = report.lag_grid[sel]
    ok = np.isfinite(m) & (m > 0)
    if ok.sum() < 2:
        raise ScalingError(f"not enough lags in [{lag_lo}, {lag_hi}]")
    slope, _, _ = _ols_loglog(np.log(sel_lags[ok].astype(float)), np.log(m[ok]))
    return slope


def find_slope_break(report: ScalingReport, q: float = 1.0) -> tuple[int, float, float]:
    """Best two-segment fit of log m(q, .) vs log delta.

    Returns (break_lag, small-lag slope, large-lag slope); the break minimizes
    the pooled squared residual of the two regressions.
    """
    qi = int(np.argmin(np.abs(report.q_grid - q)))
    sel = (report.pair_counts >= report.min_pairs)
    lags = report.lag_grid[sel].astype(float)
    m = report.m_surface[qi, sel]
    if len(lags) < 6:
        raise ScalingError("need at least 6 fitted lags for break detection")
    lx, ly = np.log(lags), np.log(m)
    best = (np.inf, -1)
    for k in range(2, len(lags) - 2):
        sse = 0.0
        for xs, ys in ((lx[:k], ly[:k]), (lx[k:], ly[k:])):
            s, b, _ = _ols_loglog(xs, ys)
            r = ys - s * xs - b
            sse += float(r @ r)
        if sse < best[0]:
            best = (sse, k)
    k = best[1]
    lo_slope, _, _ = _ols_loglog(lx[:k], ly[:k])
    hi_slope, _, _ = _ols_loglog(lx[k:], ly[k:])
    return int(lags[k]), lo_slope, hi_slope


def write_plot_csvs(report: ScalingReport, directory, stem: str) -> list[Path]:
    """Emit tidy CSVs for redrawing the log-log and zeta figures."""
    directory = Path(directory)
    loglog = ["q,log_delta,log_m"]
    used = report.pair_counts >= report.min_pairs
    for i, q in enumerate(report.q_grid):
        for lag, m in zip(report.lag_grid[used], report.m_surface[i, used]):
            loglog.append(f"{float(q)!r},{float(np.log(lag))!r},{float(np.log(m))!r}")
    zeta = ["q,zeta"] + [f"{float(q)!r},{float(z)!r}" for q, z in zip(report.q_grid, report.zeta)]
    paths = [directory / f"{stem}_loglog.csv", directory / f"{stem}_zeta.csv"]
    _atomic_write_text(paths[0], "\n".join(loglog) + "\n")
    _atomic_write_text(paths[1], "\n".join(zeta) + "\n")
    return paths
