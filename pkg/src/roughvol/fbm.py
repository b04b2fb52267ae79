"""Fractional Brownian motion synthesis and its analytic moments.

The default generator embeds the increment (fractional Gaussian noise)
covariance in a circulant matrix and synthesizes exact Gaussian paths with
two FFTs per batch.  A dense-Cholesky factorization provides a second exact
route (and the fallback should the embedding produce a negative eigenvalue),
and an approximate wavelet cascade mirrors the synthesis-by-octaves idea for
cross-checks.  Exact methods are the test oracle for everything downstream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import gamma as _gamma

from .rng import make_rng

log = logging.getLogger("roughvol")

FbmMethod = Literal["circulant", "cholesky", "wavelet"]


def _check_hurst(hurst: float) -> float:
    if not (0.0 < hurst < 1.0):
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    return float(hurst)


def fbm_covariance(t: float, s: float, hurst: float) -> float:
    """Cov(W_t, W_s) = (|t|^2H + |s|^2H - |t-s|^2H) / 2."""
    h2 = 2.0 * _check_hurst(hurst)
    return 0.5 * (abs(t) ** h2 + abs(s) ** h2 - abs(t - s) ** h2)


def fgn_autocovariance(lags: np.ndarray, hurst: float, step: float = 1.0) -> np.ndarray:
    """Autocovariance of unit-lag increments at integer lags."""
    h2 = 2.0 * _check_hurst(hurst)
    k = np.abs(np.asarray(lags, dtype=float))
    return 0.5 * step**h2 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def abs_moment_constant(q: float) -> float:
    """E|Z|^q for standard normal Z: 2^(q/2) Gamma((q+1)/2) / sqrt(pi)."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return float(2.0 ** (q / 2.0) * _gamma((q + 1.0) / 2.0) / np.sqrt(np.pi))


@dataclass(frozen=True)
class FbmPath:
    """One path on a uniform grid; values[0] == 0 at times[0] == 0."""

    hurst: float
    times: np.ndarray
    values: np.ndarray

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def fgn_batch(n_incr: int, hurst: float, step: float = 1.0, seed: int = 0, method: FbmMethod = "circulant", paths: int = 1, stream: tuple[int, ...] = ()) -> np.ndarray:
    """(paths, n_incr) array of stationary fBm increments."""
    _check_hurst(hurst)
    if n_incr < 1:
        raise ValueError("need at least one increment")
    rng = make_rng(seed, *stream)
    if method == "circulant":
        try:
            return _fgn_circulant(n_incr, hurst, step, rng, paths)
        except np.linalg.LinAlgError as exc:
            log.warning("circulant embedding failed (%s); falling back to Cholesky", exc)
            method = "cholesky"
    if method == "cholesky":
        return _fgn_cholesky(n_incr, hurst, step, rng, paths)
    if method == "wavelet":
        return np.stack([_fgn_wavelet(n_incr, hurst, step, rng) for _ in range(paths)])
    raise ValueError(f"unknown method {method!r}")


def simulate_fbm(n: int, hurst: float, step: float = 1.0, seed: int = 0, method: FbmMethod = "circulant", stream: tuple[int, ...] = ()) -> FbmPath:
    """Exact (or wavelet-approximate) fBm path on ``n`` grid points.

    The grid is t_k = k * step for k = 0..n-1 and the path starts at zero.
    Output is a deterministic function of (seed, stream, method, n, hurst,
    step).
    """
    if n < 2:
        raise ValueError("need n >= 2 grid points")
    incr = fgn_batch(n - 1, hurst, step, seed, method, paths=1, stream=stream)[0]
    values = np.concatenate([[0.0], np.cumsum(incr)])
    return FbmPath(float(hurst), np.arange(n, dtype=float) * step, values)


def fbm_paths(n: int, hurst: float, paths: int, step: float = 1.0, seed: int = 0, method: FbmMethod = "circulant") -> np.ndarray:
    """(paths, n) array of independent exact paths, each starting at zero."""
    incr = fgn_batch(n - 1, hurst, step, seed, method, paths=paths)
    out = np.zeros((paths, n))
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def _fgn_circulant(m: int, hurst: float, step: float, rng: np.random.Generator, paths: int) -> np.ndarray:
    # Embed the m-point Toeplitz autocovariance in a 2m circulant; its
    # eigenvalues are the FFT of the first row and must be nonnegative.
    r = fgn_autocovariance(np.arange(m + 1), hurst, step)
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.rfft(row).real
    if np.any(eig < 0.0):
        worst = float(eig.min())
        if worst < -1e-8 * float(eig.max()):
            raise np.linalg.LinAlgError(f"negative circulant eigenvalue {worst:g}")
        eig = np.clip(eig, 0.0, None)
    two_m = 2 * m
    z = rng.standard_normal((paths, two_m))
    # Pack the 2m real normals into the Hermitian spectrum expected by irfft.
    spectrum = np.empty((paths, m + 1), dtype=complex)
    spectrum[:, 0] = z[:, 0] * np.sqrt(2.0)
    spectrum[:, m] = z[:, m] * np.sqrt(2.0)
    spectrum[:, 1:m] = z[:, 1:m] + 1j * z[:, m + 1 :]
    spectrum *= np.sqrt(eig / (2.0 * two_m))
    return np.fft.irfft(spectrum, n=two_m, axis=1)[:, :m] * two_m


def _fgn_cholesky(m: int, hurst: float, step: float, rng: np.random.Generator, paths: int) -> np.ndarray:
    cov = fgn_autocovariance(np.abs(np.arange(m)[:, None] - np.arange(m)[None, :]), hurst, step)
    lower = np.linalg.cholesky(cov)
    return rng.standard_normal((paths, m)) @ lower.T


# Hardcoded Daubechies-10 scaling filter (20 taps), orthonormal convention.
_DB10_LOWPASS = np.array([
    0.0266700579005473, 0.1881768000776347, 0.5272011889309198,
    0.6884590394525921, 0.2811723436604265, -0.2498464243273153,
    -0.1959462743772862, 0.1273693403357541, 0.0930573646035547,
    -0.0713941471663501, -0.0294575368218399, 0.0332126740593612,
    0.0036065535669883, -0.0107331754833007, 0.0013953517469940,
    0.0019924052949908, -0.0006858566950046, -0.0001164668549943,
    0.0000935886703202, -0.0000132642028945,
])


def _fgn_wavelet(m: int, hurst: float, step: float, rng: np.random.Generator) -> np.ndarray:
    """Approximate fGn via an inverse wavelet cascade with 2^(-j(2H+1)) detail power.

    Synthesis by octaves: the coarsest approximation coefficients are seeded
    from an exact coarse-grid path, then white detail coefficients with
    geometrically scaled variance are injected at every finer level and
    reconstructed with a Daubechies-10 pair.  Edge transients are trimmed by
    synthesizing a longer signal, and the output is rescaled to the exact
    one-step increment variance (sample normalization; the method is
    approximate by design and is validated against the exact generators).
    """
    from scipy.signal import upfirdn

    g = _DB10_LOWPASS
    h = g[::-1] * (-1.0) ** np.arange(len(g))  # quadrature mirror highpass
    oversample = 2  # synthesize 4x finer and decimate: keeps filter transients sub-grid
    m_fine = m << oversample
    levels = max(4, int(np.ceil(np.log2(max(m_fine, 2)))) - 3)
    pad = 4 * len(g)
    coarse_len = max(16, -(-(m_fine + 2 * pad) >> levels)) + len(g)
    # a_{J,k} ~ 2^{J/2} W(2^J k): exact long-range structure at the top level.
    coarse_incr = _fgn_cholesky(coarse_len, hurst, float(2**levels), rng, 1)[0]
    approx = 2.0 ** (levels / 2.0) * np.cumsum(coarse_incr)
    for j in range(levels, 0, -1):
        detail = rng.standard_normal(len(approx)) * 2.0 ** (j * (hurst + 0.5))
        approx = upfirdn(g, approx, up=2) + upfirdn(h, detail, up=2)
    mid = (len(approx) - m_fine) // 2
    path = np.asarray(approx[mid : mid + m_fine + 1], dtype=float)[:: 1 << oversample]
    fgn = np.diff(path[: m + 1])
    sd = float(np.std(fgn))
    if sd == 0.0:
        raise np.linalg.LinAlgError("degenerate wavelet synthesis")
    return fgn * (step**hurst / sd)
