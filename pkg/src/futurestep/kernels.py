"""Backend selection for the relation kernels.

The compiled module is used when it imports; ``FUTURESTEP_KERNELS=python``
forces the fallback.  :func:`use_backend` switches at runtime (tests and the
benchmark use it).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

_impl: ModuleType = _pykernels


def _load(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels  # type: ignore[attr-defined]

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    out = ["python"]
    try:
        _load("cython")
        out.append("cython")
    except ImportError:
        pass
    return out


def use_backend(name: str) -> None:
    global _impl
    _impl = _load(name)


def backend() -> str:
    return _impl.BACKEND


def union_over(masks, sel):
    return _impl.union_over(masks, sel)


def eco_extend(pred, succ, e, dpred, dsucc):
    return _impl.eco_extend(pred, succ, e, dpred, dsucc)


def closure(succ):
    return _impl.closure(succ)


def encountered(hbp, ecop, events, writes):
    return _impl.encountered(hbp, ecop, events, writes)


iter_bits = _pykernels.iter_bits

_want = os.environ.get("FUTURESTEP_KERNELS", "auto")
if _want == "auto":
    try:
        _impl = _load("cython")
    except ImportError:
        _impl = _pykernels
else:
    _impl = _load(_want)
