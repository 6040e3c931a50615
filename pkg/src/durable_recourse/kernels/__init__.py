"""Hot per-step simulation kernels.

The compiled extension ``_core`` is used when it has been built; otherwise
the numpy implementations in ``_fallback`` are used. Setting the
environment variable ``DURABLE_RECOURSE_PURE=1`` forces the fallback.
"""

import os

from . import _fallback

try:
    if os.environ.get("DURABLE_RECOURSE_PURE", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _core as _impl
    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

attainability = _impl.attainability
success_probability = _impl.success_probability
dropout_probability = _impl.dropout_probability
reapply_probability = _impl.reapply_probability
attempt_features = _impl.attempt_features
gini_pairwise = _impl.gini_pairwise
topk = _impl.topk
greedy_l1 = _impl.greedy_l1

__all__ = ["BACKEND", "attainability", "success_probability", "dropout_probability",
           "reapply_probability", "attempt_features", "gini_pairwise", "topk", "greedy_l1"]
