"""Input checks shared by the public functions and estimators."""
from __future__ import annotations

import numbers

import numpy as np

__all__ = [
    "ContractError",
    "check_square",
    "check_symmetric",
    "check_index",
    "check_positive_int",
]


class ContractError(ValueError):
    """Raised when an argument violates a documented precondition."""


def check_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(a, rtol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    a = check_square(a, name)
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > rtol * scale:
        raise ContractError(f"{name} is not symmetric")
    return a


def check_index(i, n: int, name: str = "index") -> int:
    if not isinstance(i, numbers.Integral) or not 0 <= i < n:
        raise ContractError(f"{name} {i!r} out of range [0, {n})")
    return int(i)


def check_positive_int(n, name: str, allow_zero: bool = False) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ContractError(f"{name} must be an integer, got {n!r}")
    if n < 0 or (n == 0 and not allow_zero):
        raise ContractError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {n}")
    return int(n)
