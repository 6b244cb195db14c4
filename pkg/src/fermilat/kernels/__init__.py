"""Kernel backend selection.

The numba backend is used when numba imports cleanly, unless the
environment variable ``FERMILAT_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``. Both backends stay importable as ``kernels.numpy_backend``
and (when available) ``kernels.numba_backend`` for cross-checks.
"""

import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None
    NUMBA_AVAILABLE = False

_disabled = os.environ.get("FERMILAT_DISABLE_NUMBA", "") not in ("", "0")

if NUMBA_AVAILABLE and not _disabled:
    _backend = numba_backend
    BACKEND = "numba"
else:
    _backend = numpy_backend
    BACKEND = "numpy"

parity_vector = _backend.parity_vector
embed_matrix = _backend.embed_matrix
slice_matrix = _backend.slice_matrix
moebius_subsets = _backend.moebius_subsets
zeta_subsets = _backend.zeta_subsets
surface_count = _backend.surface_count
translate_count = _backend.translate_count
greedy_pack = _backend.greedy_pack
greedy_cover = _backend.greedy_cover

__all__ = [
    "BACKEND",
    "NUMBA_AVAILABLE",
    "numpy_backend",
    "numba_backend",
    "parity_vector",
    "embed_matrix",
    "slice_matrix",
    "moebius_subsets",
    "zeta_subsets",
    "surface_count",
    "translate_count",
    "greedy_pack",
    "greedy_cover",
]
