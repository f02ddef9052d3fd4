"""Distance metrics used to calibrate noise and to rank neighbors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, NotPositiveDefinite

KINDS = ("euclidean", "mahalanobis", "indicator")


def _pair(x, y):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    return x, y


def euclidean(x, y) -> float:
    x, y = _pair(x, y)
    d = x - y
    return float(np.sqrt(d @ d))


def _factor(cov):
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
        raise NotPositiveDefinite("covariance is not symmetric")
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def mahalanobis(x, y, cov) -> float:
    """sqrt((x-y)^T cov^{-1} (x-y)) through a triangular solve."""
    x, y = _pair(x, y)
    chol = _factor(cov)
    if chol.shape[0] != x.size:
        raise DimensionMismatch(f"covariance is {chol.shape}, vectors have {x.size} entries")
    w = linalg.solve_triangular(chol, x - y, lower=True)
    return float(np.sqrt(w @ w))


def indicator(x, y) -> float:
    x, y = _pair(x, y)
    return float(not np.array_equal(x, y))


def regularized_covariance(matrix, lam: float = 0.5) -> np.ndarray:
    """``lam * S + (1 - lam) * I`` where ``S`` is the unbiased sample covariance.

    ``matrix`` may also be an :class:`~vickrey.embeddings.EmbeddingStore`.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    m = np.asarray(getattr(matrix, "matrix", matrix), dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[0] < 2:
        raise ValueError("need at least two rows for a sample covariance")
    centered = m - m.mean(axis=0)
    sample = centered.T @ centered / (m.shape[0] - 1)
    cov = lam * sample + (1.0 - lam) * np.eye(m.shape[1])
    cov = 0.5 * (cov + cov.T)
    _factor(cov)
    return cov


def sqrtm_spd(cov) -> np.ndarray:
    """Symmetric square root of a positive-definite matrix."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {vals.min():.3g} is not positive")
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True, eq=False)
class DistanceMetric:
    """A metric on R^p. Mahalanobis instances carry their Cholesky factor."""

    kind: str = "euclidean"
    cov: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "mahalanobis":
            if self.cov is None:
                raise ValueError("mahalanobis metric needs a covariance")
            cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
            object.__setattr__(self, "cov", cov)
            object.__setattr__(self, "_chol", _factor(cov))

    @classmethod
    def mahalanobis(cls, cov):
        return cls("mahalanobis", cov)

    @property
    def chol(self):
        return getattr(self, "_chol", None)

    def __call__(self, x, y) -> float:
        if self.kind == "euclidean":
            return euclidean(x, y)
        if self.kind == "indicator":
            return indicator(x, y)
        x, y = _pair(x, y)
        w = linalg.solve_triangular(self._chol, x - y, lower=True)
        return float(np.sqrt(w @ w))

    def norm(self, z) -> np.ndarray:
        """d(z, 0) for each row of ``z``."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if self.kind == "euclidean":
            return np.sqrt((z * z).sum(axis=-1))
        if self.kind == "indicator":
            return (z != 0).any(axis=-1).astype(np.float64)
        w = linalg.solve_triangular(self._chol, z.T, lower=True)
        return np.sqrt((w * w).sum(axis=0))

    def to_rows(self, rows, query) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return self.norm(rows - np.asarray(query, dtype=np.float64))

    def pairwise(self, a, b=None) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = a if b is None else np.atleast_2d(np.asarray(b, dtype=np.float64))
        return np.stack([self.to_rows(b, x) for x in a]) if len(a) else np.zeros((0, len(b)))
