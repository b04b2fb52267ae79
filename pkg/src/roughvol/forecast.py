"""Log-variance and variance forecasting with a fractional-kernel predictor
and AR / HAR / GARCH baselines, evaluated by a rolling backtest.

The fractional predictor is the conditional expectation of a fractional
Brownian log-variance given its past.  In horizon units u = (t - s) / delta
the predictor density is

    (cos(H pi) / pi) * u^(-H - 1/2) / (1 + u),   u in (0, inf),

which integrates to exactly 1 for H in (0, 1/2).  Substituting x = u/(1+u)
turns its CDF into the regularized incomplete beta I_x(1/2 - H, 1/2 + H), so
discrete weights are exact integrals of the density over each observation's
cell (the u -> 0 singularity included) rather than Riemann samples.  The
history is truncated at the radius where the neglected tail mass drops below
the budget epsilon, and the kept weights are renormalized by the analytic
mass of the truncated window so constants are preserved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import betainc, betaincinv
from scipy.special import gamma as _gamma

from ._kernels import garch_nll
from .market_data import VolSeries, register_report
from .scaling import ScalingReport, fit_scaling

log = logging.getLogger("roughvol")

DEFAULT_WINDOW = 500
DEFAULT_EPSILON = 0.15
HAR_DEPTH = 20  # daily value plus 5- and 20-day means


class ForecastError(ValueError):
    pass


class InsufficientHistoryError(ForecastError):
    pass


class SingularDesignError(ForecastError):
    pass


@dataclass(frozen=True)
class RfsvPredictorConfig:
    """Fractional predictor settings: roughness H, horizon in days, tail budget."""

    hurst: float
    horizon: int
    epsilon: float = DEFAULT_EPSILON
    nu_squared: float | None = None

    def __post_init__(self):
        if not (0.0 < self.hurst < 0.5):
            raise ValueError(f"hurst must lie in (0, 1/2), got {self.hurst}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1 day")
        if self.nu_squared is not None and self.nu_squared < 0:
            raise ValueError("nu_squared must be nonnegative")


@dataclass(frozen=True)
class BaselineConfig:
    """A rolling-window autoregressive or GARCH baseline."""

    model: str  # "AR", "HAR" or "GARCH11"
    p: int = 1
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.model not in ("AR", "HAR", "GARCH11"):
            raise ValueError(f"unknown baseline model {self.model!r}")
        if self.p < 1:
            raise ValueError("AR order p must be >= 1")
        if self.window < 50:
            raise ValueError("rolling window must be >= 50 observations")


# ---------------------------------------------------------------------------
# Fractional kernel weights
# ---------------------------------------------------------------------------

def kernel_cdf(u, hurst: float):
    """Mass of the normalized predictor density on [0, u]."""
    if not (0.0 < hurst < 0.5):
        raise ForecastError(f"hurst must lie in (0, 1/2), got {hurst}")
    u = np.asarray(u, dtype=float)
    return betainc(0.5 - hurst, 0.5 + hurst, u / (1.0 + u))


def truncation_radius(epsilon: float, hurst: float) -> float:
    """Smallest r whose neglected tail mass is at most epsilon.

    epsilon is measured on the normalized kernel (density integrating to 1),
    so it is the fraction of total weight discarded: at H = 0.08 the
    look-back-one-horizon rule r = 1 corresponds to epsilon ~ 0.41.  Monotone
    decreasing in epsilon; clamped away from zero for budgets large enough to
    truncate everything.
    """
    if not (0.0 < epsilon < 1.0):
        raise ForecastError(f"epsilon must lie in (0, 1), got {epsilon}")
    x = betaincinv(0.5 - hurst, 0.5 + hurst, 1.0 - epsilon)
    x = min(float(x), 1.0 - 1e-15)
    return max(x / (1.0 - x), 1e-12)


def rfsv_weights(hurst: float, horizon: float, taus, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Normalized weights over past observations ``taus`` days back.

    ``taus`` must be nonnegative and strictly increasing (0 = the newest
    observation).  Each kept observation receives the exact kernel mass of
    its nearest-neighbour cell in u = tau/horizon space, the cells tiling
    [0, r(epsilon)]; weights beyond the truncation radius are zero.  The most
    recent observation is always kept, so a degenerate budget falls back to
    persistence.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise InsufficientHistoryError("empty history")
    if np.any(taus < 0) or np.any(np.diff(taus) <= 0):
        raise ForecastError("taus must be nonnegative and strictly increasing")
    u = taus / float(horizon)
    r = truncation_radius(epsilon, hurst)
    kept = int(np.searchsorted(u, r, side="right"))
    kept = max(kept, 1)
    edges = np.empty(kept + 1)
    edges[0] = 0.0
    edges[1:kept] = 0.5 * (u[: kept - 1] + u[1:kept])
    edges[kept] = max(r, edges[kept - 1])
    cdf = kernel_cdf(edges, hurst)
    weights = np.zeros_like(u)
    weights[:kept] = np.diff(cdf) / cdf[-1]
    return weights


def conditional_variance_constant(hurst: float) -> float:
    """c in Var[W_{t+dt} | past] = c dt^(2H): Gamma(3/2-H) / (Gamma(H+1/2) Gamma(2-2H))."""
    return float(_gamma(1.5 - hurst) / (_gamma(hurst + 0.5) * _gamma(2.0 - 2.0 * hurst)))


def _history_arrays(history: VolSeries, t=None) -> tuple[np.ndarray, np.ndarray]:
    """(taus ascending, log sigma^2) for observations dated <= t."""
    dates = history.dates
    if t is None:
        t = dates[-1]
    else:
        t = np.datetime64(t, "D")
    usable = dates <= t
    if not np.any(usable):
        raise InsufficientHistoryError(f"no observations on or before {t}")
    taus = (t - dates[usable]).astype(np.int64)[::-1]
    logvar = 2.0 * np.log(history.values[usable])[::-1]
    return taus.astype(float), logvar


def predict_log_variance(history: VolSeries, config: RfsvPredictorConfig, t=None) -> float:
    """Kernel forecast of log sigma^2 at t + horizon using data dated <= t."""
    taus, logvar = _history_arrays(history, t)
    r = truncation_radius(config.epsilon, config.hurst)
    if taus[-1] < config.horizon * r:
        raise InsufficientHistoryError(
            f"history spans {taus[-1]:.0f} days but the truncated kernel needs {config.horizon * r:.1f}"
        )
    w = rfsv_weights(config.hurst, config.horizon, taus, config.epsilon)
    return float(w @ logvar)


def predict_variance(history: VolSeries, config: RfsvPredictorConfig, t=None) -> float:
    """exp(log-variance forecast + 2 c nu^2 horizon^(2H)) — the lognormal
    convexity correction with the conditional-variance constant c(H)."""
    if config.nu_squared is None:
        raise ForecastError("variance forecasts need nu_squared")
    log_pred = predict_log_variance(history, config, t)
    c = conditional_variance_constant(config.hurst)
    return float(np.exp(log_pred + 2.0 * c * config.nu_squared * float(config.horizon) ** (2.0 * config.hurst)))


def estimate_nu_squared(scaling: ScalingReport) -> float:
    """exp of the q = 2 intercept: m(2, delta) ~ nu^2 delta^(2H)."""
    idx = np.flatnonzero(np.abs(scaling.q_grid - 2.0) < 1e-9)
    if idx.size == 0:
        raise ForecastError("scaling report has no q = 2 fit")
    return float(np.exp(scaling.log_kq[idx[0]]))


# ---------------------------------------------------------------------------
# OLS baselines
# ---------------------------------------------------------------------------

def ols_fit(design: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and their standard errors."""
    n, k = design.shape
    if n <= k:
        raise SingularDesignError(f"need more rows ({n}) than columns ({k})")
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < k:
        raise SingularDesignError(f"design matrix rank {rank} < {k}")
    resid = target - design @ coef
    dof = n - k
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return coef, np.sqrt(np.diag(cov))


def _ols_predict(design: np.ndarray, target: np.ndarray, x_new: np.ndarray) -> float:
    """Fitted-value prediction; rank deficiency is fine (projection is unique)."""
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    pred = float(x_new @ coef)
    if not np.isfinite(pred):
        raise SingularDesignError("non-finite least-squares prediction")
    return pred


def _ar_design(y: np.ndarray, p: int, js: np.ndarray) -> np.ndarray:
    cols = [np.ones(len(js))] + [y[js - i] for i in range(p + 1)]
    return np.stack(cols, axis=1)


def ar_fit_predict(y: np.ndarray, p: int, horizon: int, window: int = DEFAULT_WINDOW, origin: int | None = None, return_fit: bool = False):
    """Direct multi-step AR forecast: regress the horizon-ahead target on the
    p+1 most recent values over a rolling window, refit at each origin."""
    y = np.asarray(y, dtype=float)
    origin = len(y) - 1 if origin is None else origin
    j_hi = origin - horizon
    j_lo = j_hi - window + 1
    if j_lo < p:
        raise InsufficientHistoryError(
            f"origin {origin} needs {window} training pairs of depth {p} at horizon {horizon}"
        )
    js = np.arange(j_lo, j_hi + 1)
    if return_fit:
        coef, se = ols_fit(_ar_design(y, p, js), y[js + horizon])
        pred = float(_ar_design(y, p, np.array([origin]))[0] @ coef)
        return pred, coef, se
    return _ols_predict(_ar_design(y, p, js), y[js + horizon], _ar_design(y, p, np.array([origin]))[0])


def _har_design(y: np.ndarray, js: np.ndarray) -> np.ndarray:
    csum = np.concatenate([[0.0], np.cumsum(y)])
    mean5 = (csum[js + 1] - csum[js - 4]) / 5.0
    mean20 = (csum[js + 1] - csum[js - 19]) / 20.0
    return np.stack([np.ones(len(js)), y[js], mean5, mean20], axis=1)


def har_fit_predict(y: np.ndarray, horizon: int, window: int = DEFAULT_WINDOW, origin: int | None = None, return_fit: bool = False):
    """Direct multi-step forecast on daily value, 5-day and 20-day means."""
    y = np.asarray(y, dtype=float)
    origin = len(y) - 1 if origin is None else origin
    j_hi = origin - horizon
    j_lo = j_hi - window + 1
    if j_lo < HAR_DEPTH - 1:
        raise InsufficientHistoryError(
            f"origin {origin} needs {window} training pairs of depth {HAR_DEPTH} at horizon {horizon}"
        )
    js = np.arange(j_lo, j_hi + 1)
    if return_fit:
        coef, se = ols_fit(_har_design(y, js), y[js + horizon])
        pred = float(_har_design(y, np.array([origin]))[0] @ coef)
        return pred, coef, se
    return _ols_predict(_har_design(y, js), y[js + horizon], _har_design(y, np.array([origin]))[0])


# ---------------------------------------------------------------------------
# GARCH(1,1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GarchFit:
    omega: float
    alpha: float
    beta: float
    converged: bool
    nll: float


_GARCH_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.02, 0.95))


def fit_garch(returns: np.ndarray) -> GarchFit:
    """Gaussian QMLE of GARCH(1,1) with positivity and alpha+beta < 1.

    Multi-start bounded optimization; h_0 is the sample variance of the
    window.  Non-convergence is reported in the result, not raised.
    """
    r2 = np.asarray(returns, dtype=float) ** 2
    if len(r2) < 50:
        raise InsufficientHistoryError(f"need >= 50 returns to fit GARCH, got {len(r2)}")
    h0 = float(np.mean(r2)) or 1e-12

    # omega is orders of magnitude below alpha/beta, so optimize its log.
    def objective(theta):
        log_omega, alpha, beta = theta
        if alpha + beta >= 0.9995:
            return 1e300
        return garch_nll(r2, math.exp(log_omega), alpha, beta, h0)

    best = None
    for a0, b0 in _GARCH_STARTS:
        w0 = max(h0 * (1.0 - a0 - b0), 1e-12)
        res = minimize(
            objective,
            x0=np.array([math.log(w0), a0, b0]),
            method="L-BFGS-B",
            bounds=[(math.log(1e-14), 5.0), (0.0, 0.999), (0.0, 0.999)],
            options={"ftol": 1e-12, "gtol": 1e-9, "maxiter": 500},
        )
        if best is None or res.fun < best.fun:
            best = res
    omega, alpha, beta = math.exp(best.x[0]), float(best.x[1]), float(best.x[2])
    return GarchFit(omega, alpha, beta, bool(best.success and best.fun < 1e299), float(best.fun))


def garch_forecast(fit: GarchFit, current_var: float, horizon: int) -> float:
    """alpha_0 (1 + sum_{i=1}^{h-1} s^i) + s^h sigma_t^2 with s = alpha + beta."""
    if horizon < 1:
        raise ForecastError("horizon must be >= 1")
    s = fit.alpha + fit.beta
    powers = s ** np.arange(horizon)
    return float(fit.omega * powers.sum() + s**horizon * current_var)


def garch_fit_predict(current_var: float, returns: np.ndarray, horizon: int, window: int = DEFAULT_WINDOW) -> float:
    """Fit on the trailing ``window`` returns, forecast seeded at the current
    proxy variance."""
    returns = np.asarray(returns, dtype=float)
    if len(returns) < window:
        raise InsufficientHistoryError(f"need {window} returns, got {len(returns)}")
    fit = fit_garch(returns[-window:])
    return garch_forecast(fit, current_var, horizon)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def ratio_p(predictions, actuals, center: float | None = None) -> float:
    """Forecast MSE over the variance of the target around ``center``.

    ``center`` defaults to the mean of ``actuals`` but backtests pass the
    empirical mean over the whole period, matching the convention that
    predicting that constant scores exactly 1.
    """
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape or predictions.size == 0:
        raise ForecastError("predictions and actuals must be aligned and nonempty")
    center = float(np.mean(actuals)) if center is None else float(center)
    denom = float(np.sum((actuals - center) ** 2))
    if denom == 0.0:
        raise ForecastError("target series is constant; ratio undefined")
    return float(np.sum((actuals - predictions) ** 2) / denom)


@dataclass(frozen=True)
class ForecastEval:
    ticker: str
    model: str
    horizon: int
    track: str
    ratio_p: float
    n_forecasts: int


@register_report("roughvol.forecast_table/v1")
@dataclass
class ForecastTable:
    ticker: str
    window: int
    rows: list

    @classmethod
    def from_payload(cls, payload: dict) -> "ForecastTable":
        rows = [ForecastEval(**row) for row in payload["rows"]]
        return cls(ticker=payload["ticker"], window=payload["window"], rows=rows)


def _parse_model(name: str) -> BaselineConfig | str:
    label = name.strip().lower()
    if label == "rfsv":
        return "rfsv"
    if label.startswith("ar") and (label[2:] or "1").isdigit():
        return BaselineConfig("AR", p=int(label[2:] or 1))
    if label in ("har", "har3"):
        return BaselineConfig("HAR")
    if label in ("garch", "garch11"):
        return BaselineConfig("GARCH11")
    raise ForecastError(f"unknown model {name!r} (expected rfsv, ar<p>, har or garch)")


def _model_depth(model, horizon: int, window: int) -> int:
    """First usable forecast origin index for one model."""
    if model == "rfsv":
        return window
    if model.model == "AR":
        return window + horizon + model.p - 1
    if model.model == "HAR":
        return window + horizon + HAR_DEPTH - 2
    return window  # GARCH trains on the trailing return window only


def backtest(
    series: VolSeries,
    models,
    horizons=(1, 5, 21),
    tracks=("log_variance", "variance"),
    returns: np.ndarray | None = None,
    window: int = DEFAULT_WINDOW,
    epsilon: float = DEFAULT_EPSILON,
    hurst: float | None = None,
    nu_squared: float | None = None,
    threads: int = 1,
) -> list[ForecastEval]:
    """Daily rolling forecasts of log sigma^2 and sigma^2 for every model and
    horizon, scored by ratio_p against the whole-period empirical mean.

    Volatilities are treated as perfectly observed: proxy values are both the
    forecasting inputs and the targets.  For the fractional model, H (and
    nu^2 on the variance track) default to fits on the full series, matching
    how the roughness measurement feeds the predictor in practice; AR and HAR
    lags are positions in the series (one step = one observation) while the
    kernel predictor uses calendar gaps.  The GARCH baseline needs a daily
    return aligned with ``series`` (NaN where unavailable) and only enters the
    variance track; a non-converged refit carries the previous day's fit.
    All models at one (horizon, track) share the same forecast origins so
    their ratios are comparable.
    """
    specs = [(name, _parse_model(name)) for name in models]
    if not specs:
        return []
    n = len(series)
    logvar = 2.0 * series.log_values()
    var = series.values**2
    if any(m == "rfsv" for _, m in specs):
        if hurst is None or (nu_squared is None and "variance" in tracks):
            report = fit_scaling(series)
            hurst = report.hurst if hurst is None else hurst
            nu_squared = estimate_nu_squared(report) if nu_squared is None else nu_squared
        if not (0.0 < hurst < 0.5):
            raise ForecastError(f"kernel predictor needs H in (0, 1/2), got {hurst:.3f}")
    if returns is not None:
        returns = np.asarray(returns, dtype=float)
        if len(returns) != n:
            raise ForecastError("returns must align 1:1 with the volatility series")

    jobs = []
    for track in tracks:
        target = logvar if track == "log_variance" else var
        center = float(np.mean(target))
        for horizon in horizons:
            active = [(nm, m) for nm, m in specs if not (m != "rfsv" and m.model == "GARCH11" and track == "log_variance")]
            if not active:
                continue
            k0 = max(_model_depth(m, horizon, window) for _, m in active)
            origins = np.arange(k0, n - horizon)
            if len(origins) == 0:
                raise InsufficientHistoryError(
                    f"series of {n} points leaves no origins at window {window}, horizon {horizon}"
                )
            for name, model in active:
                jobs.append((name, model, track, target, center, origins, horizon))

    def run(job):
        name, model, track, target, center, origins, horizon = job
        preds, used = _run_model(
            model, track, series, target, origins, horizon, window,
            epsilon, hurst, nu_squared, returns,
        )
        if used.sum() == 0:
            log.error("%s produced no forecasts at horizon %d (%s)", name, horizon, track)
            return None
        actual = target[origins + horizon]
        return ForecastEval(
            ticker=series.ticker,
            model=name,
            horizon=int(horizon),
            track=track,
            ratio_p=ratio_p(preds[used], actual[used], center),
            n_forecasts=int(used.sum()),
        )

    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    return [row for row in results if row is not None]


def _run_model(model, track, series, target, origins, horizon, window, epsilon, hurst, nu_squared, returns):
    preds = np.full(len(origins), np.nan)
    used = np.zeros(len(origins), dtype=bool)
    if model == "rfsv":
        config = RfsvPredictorConfig(
            hurst=hurst, horizon=int(horizon), epsilon=epsilon,
            nu_squared=nu_squared if track == "variance" else None,
        )
        predict = predict_variance if track == "variance" else predict_log_variance
        for i, k in enumerate(origins):
            try:
                preds[i] = predict(series, config, t=series.dates[k])
                used[i] = True
            except InsufficientHistoryError:
                continue
        return preds, used
    if model.model == "GARCH11":
        if returns is None:
            raise ForecastError("the GARCH baseline needs a returns series")
        last_fit = None
        for i, k in enumerate(origins):
            window_returns = returns[k - window + 1 : k + 1]
            if np.any(~np.isfinite(window_returns)):
                continue
            fit = fit_garch(window_returns)
            if fit.converged:
                last_fit = fit
            elif last_fit is None:
                continue
            preds[i] = garch_forecast(last_fit, target[k], int(horizon))
            used[i] = True
        return preds, used
    fit_predict = har_fit_predict if model.model == "HAR" else ar_fit_predict
    kwargs = {} if model.model == "HAR" else {"p": model.p}
    for i, k in enumerate(origins):
        try:
            preds[i] = fit_predict(target, horizon=int(horizon), window=window, origin=int(k), **kwargs)
            used[i] = True
        except SingularDesignError:
            continue
    return preds, used
