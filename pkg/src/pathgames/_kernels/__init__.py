"""Hot gauge kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it imports; otherwise the pure
numpy twins in ``_fallback`` are used.  Set ``PATHGAMES_PURE_PYTHON=1`` to
force the fallback (the test suite checks both agree).
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("PATHGAMES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def backends():
    """Available kernel modules keyed by name."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def _c3(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def running_sup_sq(values):
    return _impl.running_sup_sq(_c3(values))


def upsilon_terms(sup_sq, term, m):
    return _impl.upsilon_terms(np.atleast_1d(_c3(sup_sq)), np.atleast_2d(_c3(term)), int(m))


def upsilon_prefixes(values, m):
    return _impl.upsilon_prefixes(_c3(values), int(m))


def upsilon_bar0_many(center, center_end, points, point_ends, m, step):
    return _impl.upsilon_bar0_many(
        _c3(center), int(center_end), _c3(points),
        np.ascontiguousarray(point_ends, dtype=np.int64), int(m), float(step),
    )
