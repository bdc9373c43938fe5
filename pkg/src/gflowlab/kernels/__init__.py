"""Kernel backend selection.

The compiled extension is preferred when importable; set
``GFLOWLAB_BACKEND=python`` or ``=cython`` to force a choice. Both backends
implement the same function signatures (see :mod:`gflowlab.kernels.pyref`).
"""

from __future__ import annotations

import os

from . import pyref

try:
    from .. import _ckernels
except ImportError:
    _ckernels = None

_forced = os.environ.get("GFLOWLAB_BACKEND", "").strip().lower()
if _forced == "python":
    impl = pyref
elif _forced == "cython":
    if _ckernels is None:
        raise ImportError("GFLOWLAB_BACKEND=cython but gflowlab._ckernels is not built")
    impl = _ckernels
elif _forced:
    raise ImportError(f"unknown GFLOWLAB_BACKEND value {_forced!r}")
else:
    impl = _ckernels if _ckernels is not None else pyref


def backend_name() -> str:
    return impl.BACKEND


def available_backends() -> list:
    out = [pyref]
    if _ckernels is not None:
        out.append(_ckernels)
    return out


sample_batch = impl.sample_batch
tb_loss = impl.tb_loss
db_subtb_loss = impl.db_subtb_loss
tlm_loss = impl.tlm_loss
dqn_loss = impl.dqn_loss
