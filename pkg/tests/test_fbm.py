import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

from roughvol.fbm import (
    abs_moment_constant,
    fbm_covariance,
    fbm_paths,
    fgn_autocovariance,
    simulate_fbm,
)
from roughvol.scaling import fit_scaling

from conftest import vol_series_from_logvol


def test_covariance_values():
    assert fbm_covariance(1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert fbm_covariance(1.0, 2.0, 0.5) == pytest.approx(1.0)  # Brownian min(t, s)
    assert fbm_covariance(1.0, 2.0, 0.08) == pytest.approx(0.5 * 2.0**0.16)


def test_covariance_rejects_bad_hurst():
    for h in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            fbm_covariance(1.0, 2.0, h)


def test_abs_moment_constant():
    assert abs_moment_constant(2.0) == pytest.approx(1.0)
    assert abs_moment_constant(4.0) == pytest.approx(3.0)
    assert abs_moment_constant(1.0) == pytest.approx(math.sqrt(2.0 / math.pi))
    # quadrature oracle for a fractional q
    q = 1.5
    oracle, _ = quad(lambda x: 2 * x**q * math.exp(-x * x / 2) / math.sqrt(2 * math.pi), 0, np.inf)
    assert abs_moment_constant(q) == pytest.approx(oracle, rel=1e-9)
    with pytest.raises(ValueError):
        abs_moment_constant(0.0)


def test_determinism_and_streams():
    a = simulate_fbm(256, 0.08, seed=9)
    b = simulate_fbm(256, 0.08, seed=9)
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_fbm(256, 0.08, seed=9, stream=(1,))
    assert not np.array_equal(a.values, c.values)
    assert a.values[0] == 0.0 and a.times[0] == 0.0


def test_brownian_case_increments_iid():
    path = simulate_fbm(20000, 0.5, seed=1)
    inc = path.increments()
    rho = np.corrcoef(inc[1:], inc[:-1])[0, 1]
    assert abs(rho) < 3.0 / math.sqrt(len(inc))
    assert np.var(inc) == pytest.approx(1.0, rel=0.05)


def test_increment_variance_matches_step_scaling():
    path = simulate_fbm(2521, 0.08, step=2.0, seed=5)
    var = np.var(path.increments(), ddof=1)
    assert var == pytest.approx(2.0**0.16, rel=0.06)


@pytest.mark.parametrize("method", ["circulant", "cholesky"])
def test_exact_methods_match_analytic_covariance(method):
    n, paths, hurst = 16, 4000, 0.3
    sample = fbm_paths(n, hurst, paths=paths, seed=3, method=method)
    t = np.arange(1, n, dtype=float)
    cov = 0.5 * (t[:, None] ** (2 * hurst) + t[None, :] ** (2 * hurst) - np.abs(t[:, None] - t[None, :]) ** (2 * hurst))
    sample_cov = np.cov(sample[:, 1:].T)
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / paths)
    assert np.max(np.abs(sample_cov - cov) / se) < 4.0


def test_increment_stationarity_ks():
    path = simulate_fbm(4096, 0.08, seed=21)
    inc = path.increments()
    half = len(inc) // 2
    assert ks_2samp(inc[:half], inc[half:]).pvalue > 0.01


def test_sample_self_similarity_of_moment_slopes():
    # zeta_q from one long path stays within 0.02 q of q H, averaged on seeds
    for hurst in (0.08, 0.3):
        slopes = []
        for seed in range(20):
            series = vol_series_from_logvol(simulate_fbm(2521, hurst, seed=seed).values)
            report = fit_scaling(series, q_grid=(1.0, 2.0), lag_grid=np.arange(1, 253))
            slopes.append(report.zeta)
        mean_zeta = np.mean(slopes, axis=0)
        for q, z in zip((1.0, 2.0), mean_zeta):
            assert abs(z - q * hurst) <= 0.02 * q


def test_wavelet_scaling_is_approximately_right():
    lags = np.array([1, 2, 4, 8, 16, 32, 64])
    for hurst in (0.3, 0.7):
        slopes = []
        for seed in range(4):
            path = simulate_fbm(2048, hurst, seed=seed, method="wavelet")
            sds = [np.std(path.values[l:] - path.values[:-l]) for l in lags]
            slopes.append(np.polyfit(np.log(lags), np.log(sds), 1)[0])
        assert np.mean(slopes) == pytest.approx(hurst, abs=0.1)


def test_wavelet_unit_increment_variance():
    path = simulate_fbm(1024, 0.4, step=3.0, seed=2, method="wavelet")
    assert np.std(path.increments()) == pytest.approx(3.0**0.4, rel=1e-9)


def test_fgn_autocovariance_lag0_is_variance():
    np.testing.assert_allclose(fgn_autocovariance(np.array([0]), 0.3, step=2.0), [2.0**0.6])
