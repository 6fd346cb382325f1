"""Kernel selection: compiled extension if available, NumPy fallback otherwise.

The active implementation is chosen once at import time. Set
``BCJRNET_KERNEL=python`` or ``BCJRNET_KERNEL=c`` to force a choice
(``auto``, the default, prefers the compiled extension). Both implementations
produce the same messages up to floating-point rounding; see
``benchmarks/bench_kernels.py`` for the speed comparison.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("BCJRNET_KERNEL", "auto").lower()

if _requested not in ("auto", "c", "python"):
    raise RuntimeError(f"BCJRNET_KERNEL must be auto, c, or python, got {_requested!r}")

if _requested == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "c":
            raise RuntimeError(
                "BCJRNET_KERNEL=c but the compiled kernel is not built; "
                "reinstall with Cython available"
            ) from None
        _impl = _kernels_py

ACTIVE_IMPL: str = _impl.IMPL
forward_kernel = _impl.forward_kernel
backward_kernel = _impl.backward_kernel

# Fused classifier kernel: compiled-only (the NumPy path in bcjrnet.mlp is
# its fallback), gated by the same BCJRNET_KERNEL switch.
fused_mlp = None
if _requested != "python":
    try:
        from . import _mlp_fused_c as fused_mlp  # type: ignore[no-redef]
    except ImportError:
        if _requested == "c":
            raise RuntimeError(
                "BCJRNET_KERNEL=c but the compiled classifier kernel is not built"
            ) from None
        fused_mlp = None
