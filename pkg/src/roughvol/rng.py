"""Seedable, counter-based random streams.

Every stochastic routine in the package draws from a Philox generator keyed
by ``(seed, *stream)``.  Philox is counter-based, so derived streams are
independent and the draw sequence does not depend on scheduling: simulating
paths in parallel or serially yields identical output for the same seed.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a Generator for the (seed, *stream) sub-stream.

    ``stream`` components name independent uses of the same top-level seed,
    e.g. ``make_rng(seed, 0)`` for the volatility path and ``make_rng(seed, 1)``
    for the intraday noise of one simulated market.
    """
    seq = np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))
