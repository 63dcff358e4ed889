"""Positive-definite kernels over mixed continuous/binary inputs.

Points are handled as rows of a 2-D float array whose leading columns are
the continuous coordinates and trailing columns the binary flags. `Point`
exists for callers that prefer to build single inputs explicitly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInput, DomainError

# Relative diagonal jitter applied before any Cholesky of a Gram matrix.
JITTER = 1e-6


@dataclass(frozen=True)
class Point:
    continuous: tuple[float, ...] = ()
    binary: tuple[int, ...] = ()
    pool_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple(float(v) for v in self.continuous))
        object.__setattr__(self, "binary", tuple(int(v) for v in self.binary))
        if any(b not in (0, 1) for b in self.binary):
            raise DomainError(f"binary entries must be 0 or 1, got {self.binary}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.continuous + tuple(float(b) for b in self.binary), dtype=float)

    @classmethod
    def from_array(cls, x, n_continuous: int, pool_index: int | None = None) -> "Point":
        x = np.asarray(x, dtype=float).ravel()
        return cls(tuple(x[:n_continuous]), tuple(int(round(v)) for v in x[n_continuous:]), pool_index)


def as_matrix(X) -> np.ndarray:
    """Coerce a point, a sequence of points or an array into an (n, d) float array."""
    if isinstance(X, Point):
        return X.as_array()[None, :]
    if isinstance(X, np.ndarray):
        arr = X.astype(float, copy=False)
    elif len(X) and isinstance(X[0], Point):
        arr = np.stack([p.as_array() for p in X])
    else:
        arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D point array, got shape {arr.shape}")
    return arr


class KernelFamily(str, enum.Enum):
    RBF = "rbf"
    TANIMOTO = "tanimoto"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters; callable as ``spec(X, Y)`` for a Gram matrix."""

    family: KernelFamily
    lengthscales: np.ndarray | None = None
    outputscale: float = 1.0
    dim: int | None = field(default=None)

    def __post_init__(self):
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        if not self.outputscale > 0:
            raise DomainError("outputscale must be positive")
        if family is KernelFamily.RBF:
            if self.lengthscales is None:
                raise DomainError("RBF kernel needs lengthscales")
            ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
            if np.any(ls <= 0):
                raise DomainError("lengthscales must be positive")
            object.__setattr__(self, "lengthscales", ls)
            object.__setattr__(self, "dim", ls.size)
        else:
            object.__setattr__(self, "lengthscales", None)

    @classmethod
    def rbf(cls, lengthscales, outputscale: float = 1.0) -> "KernelSpec":
        return cls(KernelFamily.RBF, np.asarray(lengthscales, dtype=float), float(outputscale))

    @classmethod
    def tanimoto(cls, outputscale: float = 1.0, dim: int | None = None) -> "KernelSpec":
        return cls(KernelFamily.TANIMOTO, None, float(outputscale), dim)

    def with_params(self, lengthscales=None, outputscale=None) -> "KernelSpec":
        kw = {}
        if lengthscales is not None:
            kw["lengthscales"] = np.asarray(lengthscales, dtype=float)
        if outputscale is not None:
            kw["outputscale"] = float(outputscale)
        return replace(self, **kw)

    def _check(self, X: np.ndarray) -> None:
        if self.dim is not None and X.shape[1] != self.dim:
            raise DomainError(f"point dimension {X.shape[1]} does not match kernel dimension {self.dim}")
        if self.family is KernelFamily.TANIMOTO and not np.all((X == 0.0) | (X == 1.0)):
            raise DomainError("Tanimoto kernel requires binary inputs")

    def __call__(self, X, Y=None) -> np.ndarray:
        X = as_matrix(X)
        Y = X if Y is None else as_matrix(Y)
        if X.shape[1] != Y.shape[1]:
            raise DomainError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        self._check(X)
        self._check(Y)
        if self.family is KernelFamily.RBF:
            ls = self.lengthscales
            d2 = cdist(X / ls, Y / ls, "sqeuclidean")
            return self.outputscale * np.exp(-0.5 * d2)
        xy = X @ Y.T
        xx = np.einsum("ij,ij->i", X, X)
        yy = np.einsum("ij,ij->i", Y, Y)
        denom = xx[:, None] + yy[None, :] - xy
        if np.any(denom <= 0):
            raise DegenerateInput("Tanimoto similarity undefined for two all-zero vectors")
        return self.outputscale * xy / denom

    def diag(self, X) -> np.ndarray:
        X = as_matrix(X)
        self._check(X)
        if self.family is KernelFamily.TANIMOTO and np.any(X.sum(axis=1) == 0):
            raise DegenerateInput("Tanimoto similarity undefined for an all-zero vector")
        return np.full(X.shape[0], self.outputscale)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value between two single points."""
    return float(spec(as_matrix(x), as_matrix(y))[0, 0])


def gram(spec: KernelSpec, X: Sequence | np.ndarray, Y: Sequence | np.ndarray | None = None) -> np.ndarray:
    """Matrix with entry (i, j) equal to ``kernel_eval(spec, X[i], Y[j])``."""
    return spec(X, Y)


class SumKernel:
    """Sum of several kernel-like callables (each exposing ``__call__`` and ``diag``)."""

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("SumKernel needs at least one part")

    def __call__(self, X, Y=None) -> np.ndarray:
        return sum(p(X, Y) for p in self.parts)

    def diag(self, X) -> np.ndarray:
        return sum(p.diag(X) for p in self.parts)
