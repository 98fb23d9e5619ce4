"""Backend selection for the hot kernels.

The compiled extension ``_ckernels`` is used when it imports cleanly;
otherwise, or when the environment variable ``RISKCLT_PURE_PYTHON`` is
set to a non-empty value other than ``0``, the numpy fallback is used.
Both operate on ascending-sorted contiguous float64 arrays.
"""
import os

from . import _pykernels

_force_pure = os.environ.get("RISKCLT_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

pairwise_sum = _impl.pairwise_sum
tail_moment = _impl.tail_moment
tail_objective = _impl.tail_objective
ternary_tail = _impl.ternary_tail

__all__ = [
    "BACKEND",
    "pairwise_sum",
    "tail_moment",
    "tail_objective",
    "ternary_tail",
]
