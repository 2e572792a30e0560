"""Backend selection for the pixel kernels.

The compiled extension is preferred; set DENSIGRAPH_PURE_PYTHON=1 to force
the numpy fallback (used by the benchmark for a fair comparison).
"""

import os

if os.environ.get("DENSIGRAPH_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
highpass_image = _impl.highpass_image
highpass_sum = _impl.highpass_sum
