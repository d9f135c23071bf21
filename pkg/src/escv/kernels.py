"""Backend selection for the rollout kernels.

Prefers the compiled extension, falls back to numpy. Set ESCV_BACKEND=python
to force the fallback (used by the benchmark and for debugging).
"""

import os

if os.environ.get("ESCV_BACKEND", "").lower() == "python":
    from . import _native_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _native as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _native_py as _impl

        BACKEND = "python"

mlp2_forward = _impl.mlp2_forward
mlp2_backward = _impl.mlp2_backward
