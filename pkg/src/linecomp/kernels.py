"""Hot-loop kernels, compiled when possible.

The Cython build (``linecomp._ckernels``) is used if it imports; otherwise the
pure-Python versions in ``linecomp._pykernels`` are. Setting
``LINECOMP_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("LINECOMP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

levenshtein = _impl.levenshtein
merge_pair = _impl.merge_pair
bpe_apply = _impl.bpe_apply

__all__ = ["BACKEND", "levenshtein", "merge_pair", "bpe_apply"]
