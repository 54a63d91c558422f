"""Backend selection for the hot loops.

The compiled extension ``volcast._ckernels`` is used when it imports; otherwise
the numpy fallback in ``volcast._pykernels`` is used. Set
``VOLCAST_PURE_PYTHON=1`` to force the fallback.
"""

import os

from volcast import _pykernels

if os.environ.get("VOLCAST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from volcast import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

garch_variance = _impl.garch_variance
garch_loglik = _impl.garch_loglik
garch_simulate = _impl.garch_simulate
binned_mi = _impl.binned_mi
