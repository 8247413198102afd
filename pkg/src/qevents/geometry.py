"""Minkowski geometry in 1+d dimensions, signature (+, -, ..., -)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch

SUPPORTED_DIMS = (1, 2, 3)


@dataclass(frozen=True)
class MetricSignature:
    dim_space: int

    def __post_init__(self):
        if self.dim_space not in SUPPORTED_DIMS:
            raise ValueError(f"spatial dimension must be one of {SUPPORTED_DIMS}, got {self.dim_space}")

    @property
    def dim(self) -> int:
        return self.dim_space + 1

    @cached_property
    def diagonal(self) -> np.ndarray:
        diag = -np.ones(self.dim)
        diag[0] = 1.0
        diag.flags.writeable = False
        return diag

    @cached_property
    def matrix(self) -> np.ndarray:
        g = np.diag(self.diagonal)
        g.flags.writeable = False
        return g


def metric(dim_space: int) -> MetricSignature:
    return MetricSignature(dim_space)


@dataclass(frozen=True)
class FourVector:
    """A point (or momentum) of Minkowski space with contravariant components."""

    components: tuple

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) - 1 not in SUPPORTED_DIMS:
            raise ValueError(f"need 2, 3 or 4 components, got {len(comps)}")
        object.__setattr__(self, "components", comps)

    @property
    def dim_space(self) -> int:
        return len(self.components) - 1

    @property
    def metric(self) -> MetricSignature:
        return MetricSignature(self.dim_space)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)

    @property
    def time(self) -> float:
        return self.components[0]

    @property
    def spatial(self) -> np.ndarray:
        return np.asarray(self.components[1:])

    def __add__(self, other: "FourVector") -> "FourVector":
        a, b = as_components(self), as_components(other)
        _check_same(a, b)
        return FourVector(tuple(a + b))

    def __sub__(self, other: "FourVector") -> "FourVector":
        a, b = as_components(self), as_components(other)
        _check_same(a, b)
        return FourVector(tuple(a - b))

    def __neg__(self) -> "FourVector":
        return FourVector(tuple(-np.asarray(self.components)))


def as_components(v) -> np.ndarray:
    """Return contravariant components of a FourVector or array-like as float array."""
    if isinstance(v, FourVector):
        return np.asarray(v.components, dtype=float)
    return np.asarray(v, dtype=float)


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def minkowski_dot(x, y):
    """Minkowski scalar product x^0 y^0 - sum_k x^k y^k.

    Works on single vectors and broadcasts over leading axes.
    """
    a, b = as_components(x), as_components(y)
    _check_same(a, b)
    prod = a * b
    return prod[..., 0] - prod[..., 1:].sum(axis=-1)


def minkowski_square(x):
    return minkowski_dot(x, x)


def lower(x) -> np.ndarray:
    """Covariant components g_{ab} x^b."""
    a = as_components(x).copy()
    a[..., 1:] *= -1.0
    return a
