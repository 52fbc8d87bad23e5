"""Hot kernels with compiled implementations and pure-Python fallbacks.

The compiled modules are used when they were built at install time, unless
``PLLAB_PURE_PYTHON=1`` is set in the environment. ``BACKEND`` names the
implementation that was selected ("cython" or "python").
"""

import os

from . import lz_py, nn_py

_force_python = os.environ.get("PLLAB_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure Python requested")
    from . import _lz_ext, _nn_ext
except ImportError:
    _lz, _nn, BACKEND = lz_py, nn_py, "python"
else:
    _lz, _nn, BACKEND = _lz_ext, _nn_ext, "cython"

lz76_phrase_count = _lz.lz76_phrase_count
bn_elu_train = _nn.bn_elu_train
bn_elu_eval = _nn.bn_elu_eval
bn_elu_backward = _nn.bn_elu_backward
all_finite = _nn.all_finite
yogi_update = _nn.yogi_update

__all__ = [
    "BACKEND", "lz76_phrase_count", "bn_elu_train", "bn_elu_eval", "bn_elu_backward",
    "all_finite", "yogi_update", "lz_py", "nn_py",
]
