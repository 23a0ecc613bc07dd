"""Kernel backend selection.

The hot kernels (dense forward pass, fused TD backward pass) exist twice: a
Cython extension (``nrsched._kernels``) and a NumPy fallback
(``nrsched._kernels_np``). The extension is preferred when it imports
cleanly; set NRSCHED_BACKEND=numpy or =compiled to force one. The active
backend name is recorded in config fingerprints, so outputs always state
which implementation produced them.
"""

import os

_requested = os.environ.get("NRSCHED_BACKEND", "")

if _requested == "numpy":
    from nrsched import _kernels_np as _impl

    BACKEND = "numpy"
elif _requested == "compiled":
    # deliberate ImportError when the extension was never built
    from nrsched import _kernels as _impl

    BACKEND = "compiled"
elif _requested:
    raise ValueError(f"NRSCHED_BACKEND must be 'numpy' or 'compiled', got {_requested!r}")
else:
    try:
        from nrsched import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from nrsched import _kernels_np as _impl

        BACKEND = "numpy"

forward_one = _impl.forward_one
batch_forward = _impl.batch_forward
td_backward_batch = _impl.td_backward_batch


def backend_name() -> str:
    """Name of the active kernel implementation ('compiled' or 'numpy')."""
    return BACKEND
