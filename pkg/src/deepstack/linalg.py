"""Dense row-major float64 matrix kernels.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64, one row
per example. ``matmul`` offers the textbook cubic product (``naive``), a
recursive Strassen product and an ``auto`` switch between them. Training
code calls :func:`dot`, the BLAS-backed product, on its hot paths.
"""
from __future__ import annotations

from typing import Callable

import numba
import numpy as np

from .exceptions import ParameterError, ShapeError

STRASSEN_CUTOFF = 64
AUTO_STRASSEN_MIN_DIM = 512


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unchecked BLAS product for the training hot paths."""
    return a @ b


@numba.njit(cache=True)
def _naive_kernel(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            for j in range(n):
                out[i, j] += aip * b[p, j]
    return out


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _naive_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b))


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _strassen_square(a: np.ndarray, b: np.ndarray, cutoff: int) -> np.ndarray:
    n = a.shape[0]
    if n <= cutoff:
        return _naive_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b))
    h = n // 2
    a11, a12, a21, a22 = a[:h, :h], a[:h, h:], a[h:, :h], a[h:, h:]
    b11, b12, b21, b22 = b[:h, :h], b[:h, h:], b[h:, :h], b[h:, h:]

    m1 = _strassen_square(a11 + a22, b11 + b22, cutoff)
    m2 = _strassen_square(a21 + a22, b11, cutoff)
    m3 = _strassen_square(a11, b12 - b22, cutoff)
    m4 = _strassen_square(a22, b21 - b11, cutoff)
    m5 = _strassen_square(a11 + a12, b22, cutoff)
    m6 = _strassen_square(a21 - a11, b11 + b12, cutoff)
    m7 = _strassen_square(a12 - a22, b21 + b22, cutoff)

    out = np.empty((n, n))
    out[:h, :h] = m1 + m4 - m5 + m7
    out[:h, h:] = m3 + m5
    out[h:, :h] = m2 + m4
    out[h:, h:] = m1 - m2 + m3 + m6
    return out


def strassen_matmul(a: np.ndarray, b: np.ndarray, cutoff: int = STRASSEN_CUTOFF) -> np.ndarray:
    """Strassen product with zero padding to the next power of two.

    Operands whose padded size is at most ``cutoff`` go straight to the
    naive kernel; the result is cropped back to ``a.rows x b.cols``.
    """
    if cutoff < 1:
        raise ParameterError(f"cutoff must be >= 1, got {cutoff}")
    m, k = a.shape
    n = b.shape[1]
    size = _next_pow2(max(m, k, n))
    if size <= cutoff:
        return naive_matmul(a, b)
    pa = np.zeros((size, size))
    pb = np.zeros((size, size))
    pa[:m, :k] = a
    pb[:k, :n] = b
    return _strassen_square(pa, pb, cutoff)[:m, :n].copy()


def matmul(a, b, algo: str = "auto", cutoff: int = STRASSEN_CUTOFF) -> np.ndarray:
    """Matrix product ``a @ b``.

    ``algo`` is one of ``naive``, ``strassen`` or ``auto``; ``auto`` uses
    Strassen once every dimension of the product reaches 512.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    if algo == "auto":
        big = min(a.shape[0], a.shape[1], b.shape[1]) >= AUTO_STRASSEN_MIN_DIM
        algo = "strassen" if big else "naive"
    if algo == "naive":
        return naive_matmul(a, b)
    if algo == "strassen":
        return strassen_matmul(a, b, cutoff)
    raise ParameterError(f"unknown matmul algorithm {algo!r}")


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def map_elements(a, f: Callable[[float], float]) -> np.ndarray:
    """Apply scalar ``f`` to every entry of ``a``."""
    a = as_matrix(a)
    return np.vectorize(f, otypes=[np.float64])(a) if a.size else a.copy()


def zip_elements(a, b, f: Callable[[float, float], float]) -> np.ndarray:
    """Combine same-shaped ``a`` and ``b`` entry by entry with ``f``."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.vectorize(f, otypes=[np.float64])(a, b) if a.size else a.copy()


def col_means(a) -> np.ndarray:
    """Column means as a ``1 x cols`` matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"col_means needs a non-empty 2-D matrix, got shape {a.shape}")
    return a.mean(axis=0, keepdims=True)
