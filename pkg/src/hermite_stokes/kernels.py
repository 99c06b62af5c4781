"""Select the compiled pointwise kernels if built, else the numpy fallback.

Set ``HERMITE_STOKES_PURE=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("HERMITE_STOKES_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

hermite_values = _impl.hermite_values
leray_pointwise = _impl.leray_pointwise
advect_products = _impl.advect_products

__all__ = ["BACKEND", "hermite_values", "leray_pointwise", "advect_products"]
