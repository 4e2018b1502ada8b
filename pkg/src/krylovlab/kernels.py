"""Hot kernels: the compiled extension when available, numpy otherwise.

Set ``KRYLOVLAB_PURE=1`` to force the pure backend.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("KRYLOVLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

sturm_count = _impl.sturm_count
tridiag_eigvalsh = _impl.tridiag_eigvalsh
disk_raster = _impl.disk_raster
flood_outside = _impl.flood_outside


def backends():
    """Available backend modules keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
