"""Kernel backend selection.

The compiled extension is preferred; the pure-Python module is the fallback.
Set AUTOBID_PURE_KERNELS=1 to force the fallback (used by the benchmark and
for debugging).
"""

import os

from . import pure

if os.environ.get("AUTOBID_PURE_KERNELS", "").strip().lower() in {"1", "true", "yes"}:
    _impl = pure
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
run_bucket = _impl.run_bucket
run_tail = _impl.run_tail
run_tail_many = _impl.run_tail_many

__all__ = ["BACKEND", "run_bucket", "run_tail", "run_tail_many", "pure"]
