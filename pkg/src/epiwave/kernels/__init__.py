"""Hot loops with a compiled implementation and a numpy fallback.

The compiled module is used when it was built; set ``EPIWAVE_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the implementation in use.
"""
import os

from . import _fallback

if os.environ.get("EPIWAVE_PURE_PYTHON", "") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

lstm_recurrence = _impl.lstm_recurrence
lstm_recurrence_backward = _impl.lstm_recurrence_backward
flat_mean_shift = _impl.flat_mean_shift

__all__ = ["BACKEND", "lstm_recurrence", "lstm_recurrence_backward", "flat_mean_shift"]
