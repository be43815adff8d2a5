"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``SEMGEO_BACKEND``
(``numba`` or ``numpy``; default ``numba``). If numba cannot be imported
the numpy path is used silently. Both implementations stay importable as
``semgeo.kernels.numpy_impl`` / ``semgeo.kernels.numba_impl`` so tests and
benchmarks can compare them directly.
"""

import logging
import os

from semgeo.kernels import _numpy as numpy_impl

log = logging.getLogger(__name__)

try:
    from semgeo.kernels import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

_requested = os.environ.get("SEMGEO_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    log.warning("unknown SEMGEO_BACKEND=%r, falling back to numpy", _requested)
    _requested = "numpy"

if _requested == "numba" and numba_impl is not None:
    BACKEND = "numba"
    _impl = numba_impl
else:
    BACKEND = "numpy"
    _impl = numpy_impl

haversine_km = _impl.haversine_km
channel_max = _impl.channel_max
top_k_mask = _impl.top_k_mask
dilate_chebyshev = _impl.dilate_chebyshev
and_count = _impl.and_count
label_overlap_counts = _impl.label_overlap_counts

__all__ = [
    "BACKEND",
    "and_count",
    "channel_max",
    "dilate_chebyshev",
    "haversine_km",
    "label_overlap_counts",
    "numba_impl",
    "numpy_impl",
    "top_k_mask",
]
