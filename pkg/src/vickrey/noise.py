"""Samplers for additive noise with density proportional to exp(-eps * d(z, 0)).

For the Euclidean norm the radius of such a vector is Gamma(p, 1/eps) and its
direction is uniform on the sphere. The Mahalanobis case is a linear image of
the Euclidean one under the symmetric square root of the covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import sqrtm_spd


def sample_l2(epsilon: float, dim: int, rng: np.random.Generator, size: int | None = None):
    """Draw from exp(-eps ||z||_2) on R^dim; returns ``(dim,)`` or ``(size, dim)``."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    m = 1 if size is None else size
    g = rng.standard_normal((m, dim))
    g /= np.sqrt((g * g).sum(axis=1, keepdims=True))
    r = rng.gamma(shape=dim, scale=1.0 / epsilon, size=m)
    z = g * r[:, None]
    return z[0] if size is None else z


def sample_mahalanobis(epsilon: float, sqrt_cov, rng: np.random.Generator, size: int | None = None):
    """Draw from exp(-eps sqrt(z^T S^{-1} z)) given the symmetric root of ``S``."""
    sqrt_cov = np.atleast_2d(np.asarray(sqrt_cov, dtype=np.float64))
    y = sample_l2(epsilon, sqrt_cov.shape[0], rng, size=size)
    return y @ sqrt_cov.T


@dataclass(frozen=True, eq=False)
class NoiseSampler:
    """Immutable sampler bound to a metric kind, epsilon and dimension."""

    kind: str
    epsilon: float
    dim: int
    sqrt_cov: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.kind == "mahalanobis":
            if self.sqrt_cov is None or np.shape(self.sqrt_cov) != (self.dim, self.dim):
                raise ValueError("mahalanobis sampler needs a dim x dim square-root covariance")
        elif self.kind != "euclidean":
            raise ValueError(f"{self.kind!r} cannot calibrate noise on R^p")

    @classmethod
    def from_cov(cls, epsilon, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        return cls("mahalanobis", epsilon, cov.shape[0], sqrtm_spd(cov))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "euclidean":
            return sample_l2(self.epsilon, self.dim, rng, size=size)
        return sample_mahalanobis(self.epsilon, self.sqrt_cov, rng, size=size)
