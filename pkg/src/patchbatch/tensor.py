"""Thin numeric helpers over float64 numpy arrays.

Every module in the package passes plain ``np.ndarray`` values of dtype
float64 in C (row-major) order. The helpers here only add the shape and
domain checks the rest of the code relies on.
"""
import numpy as np

from .errors import DimensionError, DomainError

DTYPE = np.float64


def as_tensor(x):
    """Return ``x`` as a contiguous float64 array (copying only if needed)."""
    return np.ascontiguousarray(x, dtype=DTYPE)


def matmul(a, b):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def reduce_mean_std(x):
    """Mean and population standard deviation (divisor ``n``) of a vector."""
    x = as_tensor(x)
    if x.ndim != 1:
        raise DimensionError(f"expected a rank-1 tensor, got shape {x.shape}")
    if x.size == 0:
        raise DomainError("mean/std of an empty vector is undefined")
    mean = x.mean()
    std = np.sqrt(np.mean((x - mean) ** 2))
    return float(mean), float(std)
