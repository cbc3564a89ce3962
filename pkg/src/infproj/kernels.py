"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; setting
``INFPROJ_PURE_PYTHON=1`` forces the numpy fallback. ``BACKEND`` names the choice.
"""
import os

from . import _kernels_py

if os.environ.get("INFPROJ_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

LOGISTIC = _kernels_py.LOGISTIC
TRUNCATED = _kernels_py.TRUNCATED

loss_dloss = _impl.loss_dloss
batch_losses = _impl.batch_losses
accumulate_grad = _impl.accumulate_grad
spg_x_stage = _impl.spg_x_stage
spg_y_stage = _impl.spg_y_stage


def available_backends():
    """Map backend name to module for every backend importable in this process."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
