"""Wrapped Gaussian distribution on the Lorentz model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import FactorizationError, ValidationError
from .manifold import (
    check_point,
    distance,
    exp_local,
    local_log,
    rho_over_sinh,
)


@dataclass(frozen=True)
class WrappedGaussian:
    """Push-forward of N(0, cov_local) through exp_mean(V_mean .).

    The covariance is always intrinsic (D x D, local coordinates at the
    mean), so the density is exact without pseudo-inverses.
    """

    mean: np.ndarray
    cov_local: np.ndarray

    def __post_init__(self):
        mean = check_point(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov_local, dtype=float))
        dim = mean.shape[-1] - 1
        if cov.shape != (dim, dim):
            raise ValidationError(f"covariance must be {dim}x{dim}, got {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise ValidationError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_local", cov)

    @classmethod
    def isotropic(cls, mean, variance):
        mean = np.asarray(mean, dtype=float)
        return cls(mean, variance * np.eye(mean.shape[-1] - 1))

    @property
    def dim(self):
        return self.mean.shape[-1] - 1

    def cholesky(self):
        try:
            return linalg.cholesky(self.cov_local, lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError("wrapped Gaussian covariance is not positive definite") from exc

    def log_density(self, x):
        return log_density(self, x)

    def sample(self, n, rng):
        return sample(self, n, rng)


def volume_factor(x_t, x_next):
    """Change-of-volume term (rho / sinh rho)^(D - 1) of the exponential map."""
    x_t = np.asarray(x_t, dtype=float)
    dim = x_t.shape[-1] - 1
    return rho_over_sinh(distance(x_t, x_next)) ** (dim - 1)


def log_density(dist: WrappedGaussian, x):
    x = np.asarray(x, dtype=float)
    L = dist.cholesky()
    v = local_log(np.broadcast_to(dist.mean, x.shape), x)
    z = linalg.solve_triangular(L, v.T, lower=True)
    d = dist.dim
    log_gauss = (
        -0.5 * np.sum(z**2, axis=0)
        - np.sum(np.log(np.diag(L)))
        - 0.5 * d * np.log(2.0 * np.pi)
    )
    rho = np.linalg.norm(v, axis=-1)
    return log_gauss + (d - 1) * np.log(rho_over_sinh(rho))


def sample(dist: WrappedGaussian, n: int, rng: np.random.Generator):
    """Draw ``n`` points. The caller owns the generator state."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    L = dist.cholesky()
    v = rng.standard_normal((n, dist.dim)) @ L.T
    return exp_local(np.broadcast_to(dist.mean, (n, dist.dim + 1)), v)
