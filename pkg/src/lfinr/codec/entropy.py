"""Adaptive order-0 arithmetic (range) coding of integer symbol streams.

Model: every symbol starts with count 1; after coding a symbol its count
grows by 32. When the total exceeds ``max(2**16, 2 * alphabet)`` all counts
are halved (rounding up, so none drops to 0).

Coder: 32-bit range coder with carry propagation through a cached byte
(LZMA style). A stream of ``n`` symbols always decodes from exactly the
bytes produced; the first byte is a zero preamble. An empty input encodes
to 5 bytes.

The compiled kernel (``_rangecoder``) is used when importable; setting
``LFINR_PURE_PYTHON=1`` forces the byte-identical pure-Python coder.
"""
import os

import numpy as np

from . import _rangecoder_py
from ._rangecoder_py import TruncatedStream

if os.environ.get("LFINR_PURE_PYTHON"):
    _impl = _rangecoder_py
    BACKEND = "python"
else:
    try:
        from . import _rangecoder as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _rangecoder_py
        BACKEND = "python"

__all__ = ["arith_encode", "arith_decode", "TruncatedStream", "BACKEND"]


def arith_encode(symbols, alphabet: int) -> bytes:
    if alphabet < 1:
        raise ValueError("alphabet must be >= 1")
    return _impl.encode(np.asarray(symbols, dtype=np.int64).ravel(), alphabet)


def arith_decode(data: bytes, count: int, alphabet: int) -> np.ndarray:
    if alphabet < 1:
        raise ValueError("alphabet must be >= 1")
    return _impl.decode(bytes(data), count, alphabet)
