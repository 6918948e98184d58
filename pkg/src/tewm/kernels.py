"""Compactly supported smoothing kernels on [-1, 1]."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

_KERNELS = {
    "epanechnikov": lambda u: 0.75 * (1.0 - u * u),
    "uniform": lambda u: np.full_like(u, 0.5),
    "triangular": lambda u: 1.0 - np.abs(u),
}


@dataclass(frozen=True)
class KernelSpec:
    name: str = "epanechnikov"

    def __post_init__(self):
        if self.name not in _KERNELS:
            raise ValueError(f"unknown kernel {self.name!r}; choose from {sorted(_KERNELS)}")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= 1.0
        return np.where(inside, _KERNELS[self.name](np.where(inside, u, 0.0)), 0.0)

    def weights(self, X, x, h: float) -> np.ndarray:
        """Product-kernel weights ``prod_j K((X_j - x_j) / h) / h`` for each row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if X.shape[1] != x.shape[0]:
            raise DimensionMismatch(f"evaluation point has {x.shape[0]} coordinates, data has {X.shape[1]}")
        if not h > 0:
            raise ValueError(f"bandwidth must be positive (got {h})")
        if np.isinf(h):
            # limit up to a common factor, which cancels in every kernel ratio
            return np.prod(self(np.zeros_like(X)), axis=1)
        return np.prod(self((X - x) / h) / h, axis=1)


def rule_of_thumb_bandwidth(x, scale: float = 1.06) -> float:
    """``scale * sd(x) * n^(-1/5)``."""
    x = np.asarray(x, dtype=float)
    return float(scale * np.std(x, ddof=1) * x.shape[0] ** (-0.2))
