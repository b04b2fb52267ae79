import logging

import numpy as np
import pytest

from roughvol.fbm import abs_moment_constant, simulate_fbm
from roughvol.scaling import fit_scaling, m_of_q_delta
from roughvol.simulate import (
    FouParams,
    NoiseRegime,
    SimConfig,
    extract_ohlc,
    noise_regime_classify,
    proxy_recovery_experiment,
    realized_variance,
    sim_dates,
    simulate_fou,
    simulate_intraday,
    simulate_market,
    synthetic_rv_logvol,
)

RFSV = FouParams(hurst=0.08, nu=0.3, alpha=5e-4, mean_level=-5.0)


def test_fou_params_validation():
    with pytest.raises(ValueError):
        FouParams(hurst=0.0, nu=0.3, alpha=0.0, mean_level=-5.0)
    with pytest.raises(ValueError):
        FouParams(hurst=0.3, nu=0.0, alpha=0.0, mean_level=-5.0)
    with pytest.raises(ValueError):
        FouParams(hurst=0.3, nu=0.3, alpha=-0.1, mean_level=-5.0)
    assert FouParams(hurst=0.3, nu=0.3, alpha=0.1, mean_level=-5.0).x0 == -5.0


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_days=0)
    with pytest.raises(ValueError):
        SimConfig(n_days=10, scheme="euler")
    cfg = SimConfig.from_window(n_days=10, window_hours=8.0, step_seconds=60.0)
    assert cfg.steps_per_day == 480


def test_fou_zero_alpha_is_scaled_fbm():
    params = FouParams(hurst=0.08, nu=0.3, alpha=0.0, mean_level=-5.0)
    x = simulate_fou(params, 500, seed=3)
    w = simulate_fbm(500, 0.08, 1.0, 3, stream=(0,)).values
    np.testing.assert_array_equal(x, -5.0 + 0.3 * w)


def test_fou_tiny_nu_fixed_point():
    params = FouParams(hurst=0.2, nu=1e-12, alpha=0.1, mean_level=-4.0)
    x = simulate_fou(params, 400, seed=1)
    np.testing.assert_allclose(x, -4.0, atol=1e-9)


def test_fou_euler_recursion_matches_reference():
    params = FouParams(hurst=0.1, nu=0.4, alpha=0.05, mean_level=-5.0, x0=-4.2)
    x = simulate_fou(params, 200, seed=9)
    w = simulate_fbm(200, 0.1, 1.0, 9, stream=(0,)).values
    ref = np.empty(200)
    ref[0] = -4.2
    for n in range(199):
        ref[n + 1] = ref[n] + 0.4 * (w[n + 1] - w[n]) + 0.05 * (-5.0 - ref[n])
    np.testing.assert_allclose(x, ref, atol=1e-12)


def test_fou_mean_reversion_to_level():
    means = [simulate_fou(RFSV, 2521, seed=s).mean() for s in range(20)]
    assert abs(np.mean(means) - (-5.0)) < 0.5


def test_simulate_intraday_basics():
    cfg = SimConfig(n_days=3, steps_per_day=50, p0=80.0, seed=4)
    days = simulate_intraday(np.zeros(3), cfg)
    assert len(days) == 3 and all(len(d) == 51 for d in days)
    np.testing.assert_allclose(np.concatenate(days), 80.0)

    days = simulate_intraday(np.full(3, 0.01), cfg)
    assert days[1][0] == days[0][-1]  # next day opens at previous close
    again = simulate_intraday(np.full(3, 0.01), cfg)
    np.testing.assert_array_equal(np.concatenate(days), np.concatenate(again))


def test_intraday_realized_variance_clt():
    n_steps = 23400
    cfg = SimConfig(n_days=1, steps_per_day=n_steps, seed=7)
    day = simulate_intraday(np.array([0.01]), cfg)[0]
    rv = realized_variance(day)
    assert rv == pytest.approx(1e-4, rel=3.0 * np.sqrt(2.0 / n_steps))


def test_extract_ohlc():
    dates = sim_dates(2)
    up = np.array([1.0, 2.0, 3.0])
    wiggle = np.array([3.0, 2.5, 3.5, 3.2])
    series = extract_ohlc([up, wiggle], dates)
    first, second = series.bar(0), series.bar(1)
    assert (first.open, first.low, first.close, first.high) == (1.0, 1.0, 3.0, 3.0)
    assert (second.open, second.high, second.low, second.close) == (3.0, 3.5, 2.5, 3.2)
    assert not first.validate() and not second.validate()
    with pytest.raises(ValueError):
        extract_ohlc([np.array([])], sim_dates(1))


def test_realized_variance():
    assert realized_variance(np.array([5.0, 5.0, 5.0])) == 0.0
    assert realized_variance(np.array([100.0, 100.0 * np.exp(0.01)])) == pytest.approx(1e-4)
    prices = np.array([1.0, 1.1, 0.9, 1.05, 1.2])
    assert realized_variance(prices) == pytest.approx(
        realized_variance(prices[:3]) + realized_variance(prices[2:])
    )
    with pytest.raises(ValueError):
        realized_variance(np.array([1.0]))
    with pytest.raises(ValueError):
        realized_variance(np.array([1.0, -2.0]))


def test_market_consistent_with_intraday_lists():
    cfg = SimConfig(n_days=5, steps_per_day=200, seed=11)
    vol = np.full(5, 0.015)
    market = simulate_market(vol, cfg)
    days = simulate_intraday(vol, cfg)
    ohlc = extract_ohlc(days, sim_dates(5))
    np.testing.assert_allclose(market.ohlc.open, ohlc.open, rtol=1e-12)
    np.testing.assert_allclose(market.ohlc.high, ohlc.high, rtol=1e-12)
    np.testing.assert_allclose(market.ohlc.low, ohlc.low, rtol=1e-12)
    np.testing.assert_allclose(market.ohlc.close, ohlc.close, rtol=1e-12)
    np.testing.assert_allclose(market.bars.realized_var, [realized_variance(d) for d in days], rtol=1e-10)


def test_market_bars_satisfy_invariants():
    market = simulate_market(RFSV, SimConfig(n_days=64, steps_per_day=300, seed=2))
    for bar in market.ohlc:
        assert not bar.validate()
    assert market.redraw_count == 0


def test_negative_price_guard_redraws_deterministically(caplog):
    # sigma sqrt(delta) = 5 makes nonpositive multiplicative factors common
    cfg = SimConfig(n_days=4, steps_per_day=25, seed=3)
    with caplog.at_level(logging.WARNING, logger="roughvol"):
        market = simulate_market(np.full(4, 25.0), cfg)
    assert market.redraw_count > 0
    again = simulate_market(np.full(4, 25.0), cfg)
    assert again.redraw_count == market.redraw_count
    np.testing.assert_array_equal(market.bars.rel_close, again.bars.rel_close)
    # gaussian-log scheme never redraws
    log_cfg = SimConfig(n_days=4, steps_per_day=25, seed=3, scheme="gaussian-log")
    assert simulate_market(np.full(4, 25.0), log_cfg).redraw_count == 0


def test_market_without_representable_prices_keeps_log_bars():
    # vol around e^250 drives |log price| beyond exp() range within a day
    params = FouParams(hurst=0.1, nu=0.3, alpha=0.0, mean_level=250.0)
    market = simulate_market(params, SimConfig(n_days=16, steps_per_day=40, seed=1, scheme="gaussian-log"))
    assert market.ohlc is None
    assert np.all(np.isfinite(market.bars.rel_high))
    assert len(market.gk_vol) == 16


def test_corollary_scaling_of_fou_moments():
    # with alpha T ~ 1 the fOU moments stay near the pure-fBm power law
    lags = (1, 10, 100, 400)
    ratios = {q: [] for q in (1.0, 2.0)}
    for seed in range(20):
        series_vals = simulate_fou(RFSV, 2521, seed=seed)
        from conftest import vol_series_from_logvol

        series = vol_series_from_logvol(series_vals)
        for q in ratios:
            expected = RFSV.nu**q * abs_moment_constant(q) * np.array(lags, dtype=float) ** (q * RFSV.hurst)
            got = np.array([m_of_q_delta(series, q, lag) for lag in lags])
            ratios[q].append(got / expected)
    for q, r in ratios.items():
        np.testing.assert_allclose(np.mean(r, axis=0), 1.0, rtol=0.2)


def test_small_alpha_stays_near_fbm_proposition():
    # sup deviation from x0 + nu W shrinks as alpha drops tenfold
    devs = {5e-4: [], 5e-5: []}
    for alpha in devs:
        params = FouParams(hurst=0.08, nu=0.3, alpha=alpha, mean_level=-5.0)
        for seed in range(20):
            x = simulate_fou(params, 2521, seed=seed)
            w = simulate_fbm(2521, 0.08, 1.0, seed, stream=(0,)).values
            devs[alpha].append(np.max(np.abs(x - (-5.0 + 0.3 * w))))
    assert np.mean(devs[5e-5]) < np.mean(devs[5e-4])


def test_proxy_recovery_truth_matches_input():
    cfg = SimConfig(n_days=2521, steps_per_day=500, seed=3)
    result = proxy_recovery_experiment(RFSV, cfg, lag_grid=np.arange(1, 51))
    hursts = result.hursts()
    assert hursts["truth"] == pytest.approx(0.08, abs=0.02)
    assert hursts["realized"] == pytest.approx(hursts["truth"], abs=0.02)


def test_noise_regime_classify():
    # ratio = nu^2 lag^(2H) n: pick inputs landing in each regime
    assert noise_regime_classify(0.01, 0.1, 100, 1.0) is NoiseRegime.NOISE_DOMINATED
    assert noise_regime_classify(0.1, 0.1, 100, 1.0) is NoiseRegime.INTERMEDIATE
    assert noise_regime_classify(0.1, 0.1, 100_000, 1.0) is NoiseRegime.SIGNAL_DOMINATED
    with pytest.raises(ValueError):
        noise_regime_classify(0.0, 0.1, 100, 1.0)


def test_synthetic_rv_logvol_regimes():
    flat = synthetic_rv_logvol(nu=1e-9, hurst=0.08, n_obs_per_day=100, n_days=2521, seed=2)
    rep = fit_scaling(flat, q_grid=(1.0, 2.0), lag_grid=np.arange(1, 100))
    assert abs(rep.hurst) < 0.01

    clean = synthetic_rv_logvol(nu=0.3, hurst=0.08, n_obs_per_day=10**9, n_days=2521, seed=2)
    rep = fit_scaling(clean, q_grid=(1.0, 2.0), lag_grid=np.arange(1, 51))
    assert rep.hurst == pytest.approx(0.08, abs=0.03)

    # intermediate: noise floor flattens small lags, signal shows at large lags
    from roughvol.scaling import find_slope_break, slope_on_lag_range

    lows, highs = [], []
    for seed in range(8):
        mixed = synthetic_rv_logvol(nu=0.3, hurst=0.3, n_obs_per_day=5, n_days=2521, seed=seed)
        rep = fit_scaling(mixed, q_grid=(1.0, 2.0), lag_grid=np.arange(1, 101))
        lows.append(slope_on_lag_range(rep, 1.0, 1, 3))
        highs.append(slope_on_lag_range(rep, 1.0, 30, 100))
        break_lag, _, _ = find_slope_break(rep, 1.0)
        assert 2 <= break_lag <= 90
    assert np.mean(highs) > np.mean(lows) + 0.1
