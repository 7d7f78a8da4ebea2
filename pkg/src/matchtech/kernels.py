"""Backend selection for the coalition kernels.

The compiled extension is used when it imports; set ``MATCHTECH_PURE=1`` to
force the numpy fallback. ``BACKEND`` names the active implementation.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MATCHTECH_PURE", "") not in ("", "0"):
    _impl, BACKEND = _kernels_py, "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl, BACKEND = _kernels_py, "python"

tree_coalition_values = _impl.tree_coalition_values
tree_coalition_values_direct = _impl.tree_coalition_values_direct
shapley_from_coalitions = _impl.shapley_from_coalitions

__all__ = ["BACKEND", "tree_coalition_values", "tree_coalition_values_direct", "shapley_from_coalitions"]
