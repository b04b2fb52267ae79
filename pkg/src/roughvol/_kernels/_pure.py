"""Numpy reference implementations of the hot kernels.

These define the contract the compiled extension must match.  The scan works
in log-price space and accumulates each day relative to its own open: the
multiplicative Euler step P -> P (1 + s z) becomes log1p(s z), which never
overflows, and day-local accumulation keeps the intraday range at full
precision even when volatility is hundreds of log-units away from the price
level.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

_HUGE_NLL = 1e300


def scan_days(z: np.ndarray, sigma_sqrt_delta: np.ndarray, log_open0: float, multiplicative: bool):
    """Scan a block of trading days driven by standard normals ``z``.

    z has shape (days, steps); day b opens at the previous day's close
    (``log_open0`` for the first) and moves by log1p(s_b z) per step under
    the multiplicative scheme (caller guarantees 1 + s_b z > 0) or by s_b z
    under the Gaussian log scheme.

    Returns (log_open, rel_high, rel_low, rel_close, realized_var): the
    absolute log open per day plus high/low/close displacements from that
    open, and the sum of squared log increments.
    """
    z = np.ascontiguousarray(z, dtype=float)
    ssd = np.asarray(sigma_sqrt_delta, dtype=float)
    steps = ssd[:, None] * z
    incr = np.log1p(steps) if multiplicative else steps
    local = np.cumsum(incr, axis=1)
    rel_close = local[:, -1].copy()
    rel_high = np.maximum(local.max(axis=1), 0.0)
    rel_low = np.minimum(local.min(axis=1), 0.0)
    rv = np.einsum("ij,ij->i", incr, incr)
    log_open = np.empty(len(ssd))
    log_open[0] = log_open0
    acc = log_open0
    for b in range(1, len(ssd)):
        acc += rel_close[b - 1]
        log_open[b] = acc
    return log_open, rel_high, rel_low, rel_close, rv


def garch_variance_path(r2: np.ndarray, omega: float, alpha: float, beta: float, h0: float) -> np.ndarray:
    """h_t with h_0 = h0 and h_{t+1} = omega + alpha r2_t + beta h_t."""
    r2 = np.asarray(r2, dtype=float)
    h = np.empty(len(r2))
    h[0] = h0
    if len(r2) > 1:
        h[1:] = lfilter([1.0], [1.0, -beta], omega + alpha * r2[:-1], zi=[beta * h0])[0]
    return h


def garch_nll(r2: np.ndarray, omega: float, alpha: float, beta: float, h0: float) -> float:
    """Gaussian quasi-likelihood core: sum of log h_t + r2_t / h_t."""
    h = garch_variance_path(r2, omega, alpha, beta, h0)
    if np.any(h <= 0.0) or not np.all(np.isfinite(h)):
        return _HUGE_NLL
    total = float(np.sum(np.log(h) + np.asarray(r2, dtype=float) / h))
    return total if np.isfinite(total) and total < _HUGE_NLL else _HUGE_NLL
