"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The Cython extension (``roughvol._kernels._core``) fuses the intraday
price-path scan and the GARCH likelihood recursion into single passes.  When
the extension is missing (no compiler at install time) or when
``ROUGHVOL_PURE_KERNELS=1`` is set, the numpy implementations in ``_pure``
are used instead; both backends implement identical contracts and agree to
floating-point roundoff (see tests/test_kernels.py and benchmarks/).
"""

from __future__ import annotations

import importlib
import os

from . import _pure

_core = None
if os.environ.get("ROUGHVOL_PURE_KERNELS", "0") in ("", "0"):
    try:
        _core = importlib.import_module("._core", __name__)
    except ImportError:
        _core = None

_impl = _core if _core is not None else _pure

BACKEND = "compiled" if _core is not None else "pure"

scan_days = _impl.scan_days
garch_nll = _impl.garch_nll
garch_variance_path = _impl.garch_variance_path


def available_backends() -> dict[str, object]:
    """Importable backend modules keyed by name (for parity tests and benchmarks)."""
    out: dict[str, object] = {"pure": _pure}
    if _core is not None:
        out["compiled"] = _core
    return out
