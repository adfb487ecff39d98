"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``CHSHRAND_PURE_PYTHON`` is set to a non-empty value) the numpy versions
are used. Both return identical integers.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _pykernels

if os.environ.get("CHSHRAND_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def backend(name: str | None = None):
    """Module implementing the kernels; ``name`` forces 'python' or 'cython'."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def subset_signatures(n: int):
    return _impl.subset_signatures(n)


def best_pair(kx, cx, rx, ky, cy, ry, thresh):
    return _impl.best_pair(kx, cx, rx, ky, cy, ry, thresh)


def tally_tests(*args):
    return _impl.tally_tests(*args)


def mask_members(mask: int) -> list[int]:
    out = []
    code = 0
    while mask:
        if mask & 1:
            out.append(code)
        mask >>= 1
        code += 1
    return out


def mask_key(mask: int) -> tuple[int, ...]:
    """Lexicographic key of the set encoded by ``mask`` (sorted members)."""
    return tuple(mask_members(mask))


class SubsetTable:
    """Sizes and column sums of all subsets of {0,1}^n (n <= 4)."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.sizes, self.cols = subset_signatures(n)


@lru_cache(maxsize=None)
def subset_table(n: int) -> SubsetTable:
    return SubsetTable(n)
