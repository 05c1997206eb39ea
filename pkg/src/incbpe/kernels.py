"""Backend selection for the BPE inner loops.

The Cython extension is used when it was built; otherwise, or when
``INCBPE_PURE=1``, the pure-Python module stands in. Both expose
``word_pairs``, ``weighted_pair_counts``, ``merge_pair`` and
``apply_ranked`` with identical results.
"""

import os

from . import _kernels_py

if os.environ.get("INCBPE_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

word_pairs = _impl.word_pairs
weighted_pair_counts = _impl.weighted_pair_counts
merge_pair = _impl.merge_pair
apply_ranked = _impl.apply_ranked

__all__ = ["BACKEND", "word_pairs", "weighted_pair_counts", "merge_pair", "apply_ranked"]
