"""Numeric kernel selection: compiled extension when importable, numpy
fallback otherwise. Set DROPGGM_PURE=1 to force the pure path."""

import os

from . import _pykernels

if os.environ.get("DROPGGM_PURE", "") not in ("", "0"):
    _impl = _pykernels
    COMPILED = False
else:
    try:
        from . import _ckernels as _impl
        COMPILED = True
    except ImportError:
        _impl = _pykernels
        COMPILED = False

drop_sweep = _impl.drop_sweep
lasso_cd_gram = _impl.lasso_cd_gram
kendall_tau_brute = _impl.kendall_tau_brute

KERNEL_NAME = "compiled" if COMPILED else "pure"
