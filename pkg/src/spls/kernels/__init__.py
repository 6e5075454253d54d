"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and the environment variable
``SPLS_USE_NUMBA`` is not one of ``0``, ``false``, ``no``, ``off``. The flag is
read once, at import time. Both implementations stay importable as
:data:`numpy_impl` and :data:`numba_impl` (the latter is ``None`` without numba)
so the benchmark and the tests can compare them directly.

Grid conventions: interior nodes of a uniform 1D mesh are numbered left to
right; interior nodes of a uniform 2D mesh are numbered row by row (x fastest).
Prolongation is P1 interpolation on meshes whose squares are cut along the
(1, 1) diagonal; restriction is its exact transpose.
"""
import os
from types import SimpleNamespace

from . import _numpy

_FLAG = os.environ.get("SPLS_USE_NUMBA", "1").strip().lower()

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NAMES = ("prolong_1d", "restrict_1d", "prolong_2d", "restrict_2d", "p1_element_data")

numpy_impl = SimpleNamespace(**{n: getattr(_numpy, n) for n in NAMES})
numba_impl = None if _numba is None else SimpleNamespace(**{n: getattr(_numba, n) for n in NAMES})

USE_NUMBA = numba_impl is not None and _FLAG not in {"0", "false", "no", "off"}
_active = numba_impl if USE_NUMBA else numpy_impl

prolong_1d = _active.prolong_1d
restrict_1d = _active.restrict_1d
prolong_2d = _active.prolong_2d
restrict_2d = _active.restrict_2d
p1_element_data = _active.p1_element_data


def backend():
    """Name of the active kernel path, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
