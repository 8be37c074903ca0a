"""Lorentz-model hyperbolic geometry.

Points live on the upper sheet of the hyperboloid ``<x, x>_L = -1, x0 > 0``
embedded in R^(D+1). All functions broadcast over leading axes, so a single
point has shape ``(D+1,)`` and a batch has shape ``(..., D+1)``.

Tangent vectors are carried either in ambient coordinates (``(..., D+1)``)
or in intrinsic local coordinates (``(..., D)``) with respect to the
orthonormal frame obtained by parallel-transporting the canonical basis
``e_1 .. e_D`` from the origin.

Besides the free functions, two small geometry objects (:class:`Lorentz`
and :class:`Euclidean`) expose the handful of differentiable primitives the
latent-variable models need: squared geodesic distances, local step
coordinates, the change-of-volume term and their vector-Jacobian products.
"""

from __future__ import annotations

import numpy as np

_SERIES_CUTOFF = 0.1
_EXPMAP_ZERO = 1e-12


def _series(coeffs, r2):
    out = np.zeros_like(r2)
    for c in reversed(coeffs):
        out = out * r2 + c
    return out


# Taylor coefficients in powers of rho**2.
_RHO_OVER_SINH = (1.0, -1.0 / 6, 7.0 / 360, -31.0 / 15120, 127.0 / 604800)
_DG_OVER_SINH = (-1.0 / 3, 2.0 / 15, -2.0 / 63, 4.0 / 675, -2.0 / 2079)
_SINH_OVER_RHO = (1.0, 1.0 / 6, 1.0 / 120, 1.0 / 5040, 1.0 / 362880)
_DSINHC_OVER_RHO = (1.0 / 3, 1.0 / 30, 1.0 / 840, 1.0 / 45360, 1.0 / 3991680)


def rho_over_sinh(rho):
    """rho / sinh(rho), exact at rho = 0."""
    rho = np.asarray(rho, dtype=float)
    small = rho < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    return np.where(small, _series(_RHO_OVER_SINH, rho**2), safe / np.sinh(safe))


def drho_over_sinh(rho):
    """d/drho (rho / sinh rho) divided by sinh(rho); equals d/da f(a) with a = cosh rho."""
    rho = np.asarray(rho, dtype=float)
    small = rho < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    sh = np.sinh(safe)
    exact = (sh - safe * np.cosh(safe)) / sh**3
    return np.where(small, _series(_DG_OVER_SINH, rho**2), exact)


def sinh_over_rho(rho):
    rho = np.asarray(rho, dtype=float)
    small = rho < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    return np.where(small, _series(_SINH_OVER_RHO, rho**2), np.sinh(safe) / safe)


def dsinh_over_rho(rho):
    """d/drho (sinh rho / rho) divided by rho."""
    rho = np.asarray(rho, dtype=float)
    small = rho < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    exact = (safe * np.cosh(safe) - np.sinh(safe)) / safe**3
    return np.where(small, _series(_DSINHC_OVER_RHO, rho**2), exact)


def metric_tensor(dim: int) -> np.ndarray:
    """The Minkowski metric diag(-1, 1, ..., 1) of size dim+1."""
    g = np.eye(dim + 1)
    g[0, 0] = -1.0
    return g


def origin(dim: int) -> np.ndarray:
    mu = np.zeros(dim + 1)
    mu[0] = 1.0
    return mu


def lorentz_inner(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    if x.shape[-1] < 2:
        raise ValueError("Lorentz vectors need at least 2 coordinates")
    return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]


def lorentz_norm(u):
    return np.sqrt(np.maximum(lorentz_inner(u, u), 0.0))


def _cosh_minus_one(x, z):
    # cosh(d) - 1 = <x - z, x - z>_L / 2, free of the cancellation in -<x, z> - 1
    diff = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
    return np.maximum(0.5 * lorentz_inner(diff, diff), 0.0)


def distance(x, z):
    """Geodesic distance arccosh(-<x, z>_L)."""
    e = _cosh_minus_one(x, z)
    return 2.0 * np.arcsinh(np.sqrt(0.5 * e))


def pairwise_distance(X, Z=None):
    X = np.atleast_2d(X)
    Z = X if Z is None else np.atleast_2d(Z)
    # -<x, z> - 1 from one matrix product; entries close to zero are redone
    # with the cancellation-free difference form
    e = -(X[:, 1:] @ Z[:, 1:].T - np.outer(X[:, 0], Z[:, 0])) - 1.0
    close = e < 1e-4
    if np.any(close):
        i, j = np.nonzero(close)
        e[i, j] = _cosh_minus_one(X[i], Z[j])
    e = np.maximum(e, 0.0)
    return 2.0 * np.arcsinh(np.sqrt(0.5 * e))


def expmap(x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n = lorentz_norm(u)[..., None]
    out = np.cosh(n) * x + sinh_over_rho(n) * u
    out = np.where(n < _EXPMAP_ZERO, x, out)
    return renormalize(out)


def logmap(x, z):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    e = _cosh_minus_one(x, z)
    rho = 2.0 * np.arcsinh(np.sqrt(0.5 * e))
    a = 1.0 + e
    # project z onto the tangent space at x: z + <x, z> x
    w = z - a[..., None] * x
    return rho_over_sinh(rho)[..., None] * w


def parallel_transport(x, z, u):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    coef = lorentz_inner(z, u) / (1.0 - lorentz_inner(x, z))
    return u + coef[..., None] * (x + z)


def project_to_tangent(x, w):
    """proj_x(w) = w + <x, w>_L x."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    return w + lorentz_inner(x, w)[..., None] * x


def projector(x):
    """Matrix form G + x x^T that maps Euclidean gradients to Riemannian ones."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1] - 1
    return metric_tensor(dim) + x[..., :, None] * x[..., None, :]


def tangent_basis(x):
    """Orthonormal frame V_x of shape (..., D+1, D).

    Column i is the parallel transport of e_{i+1} from the origin, which has
    the closed form e_{i+1} + x_{i+1} (mu0 + x) / (1 + x0).
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1] - 1
    mu0_plus_x = x.copy()
    mu0_plus_x[..., 0] += 1.0
    coef = x[..., 1:] / (1.0 + x[..., 0:1])
    V = mu0_plus_x[..., :, None] * coef[..., None, :]
    V[..., 1:, :] += np.eye(dim)
    return V


def to_local(x, u):
    """Local coordinates V_x^T G u of an ambient tangent vector."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    # <v_i, u>_L = u_i - x_i (u0 - <x, u>_L) / (1 + x0)
    coef = (u[..., 0] - lorentz_inner(x, u)) / (1.0 + x[..., 0])
    return u[..., 1:] - x[..., 1:] * coef[..., None]


def to_ambient(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    xv = np.sum(x[..., 1:] * v, axis=-1)
    s = xv / (1.0 + x[..., 0])
    return np.concatenate([xv[..., None], v + s[..., None] * x[..., 1:]], axis=-1)


def local_cov_to_ambient(x, cov_local):
    """Ambient covariance V_x S V_x^T of a local covariance S."""
    V = tangent_basis(x)
    return V @ cov_local @ np.swapaxes(V, -1, -2)


def renormalize(x):
    """Snap points back onto the hyperboloid by solving for x0."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 0] = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
    return x


def check_point(x, tol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("Lorentz points need at least 2 coordinates")
    err = np.abs(lorentz_inner(x, x) + 1.0)
    scale = np.maximum(1.0, x[..., 0] ** 2)
    if np.any(err > tol * scale) or np.any(x[..., 0] <= 0):
        raise ValueError("point is not on the hyperboloid")
    return x


def poincare_from_lorentz(x):
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., :1])


def lorentz_from_poincare(p):
    p = np.asarray(p, dtype=float)
    sq = np.sum(p**2, axis=-1, keepdims=True)
    return np.concatenate([(1.0 + sq), 2.0 * p], axis=-1) / (1.0 - sq)


def geodesic(x, z, ts):
    """Points exp_x(t log_x(z)) for each fraction t in ``ts``."""
    u = logmap(x, z)
    ts = np.asarray(ts, dtype=float)
    return expmap(np.broadcast_to(x, ts.shape + x.shape[-1:]), ts[:, None] * u)


def random_points(rng: np.random.Generator, n: int, dim: int, scale: float = 1.0):
    v = rng.normal(scale=scale, size=(n, dim))
    mu = np.broadcast_to(origin(dim), (n, dim + 1))
    return expmap(mu, to_ambient(mu, v))


def local_log(x, z):
    """Local coordinates of log_x(z), i.e. V_x^T G log_x(z)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    e = _cosh_minus_one(x, z)
    rho = 2.0 * np.arcsinh(np.sqrt(0.5 * e))
    a = 1.0 + e
    c = (z[..., 0] + a) / (1.0 + x[..., 0])
    q = z[..., 1:] - x[..., 1:] * c[..., None]
    return rho_over_sinh(rho)[..., None] * q


def exp_local(x, v):
    return expmap(x, to_ambient(x, v))


class Lorentz:
    """Differentiable primitives on the Lorentz model of H^D.

    Gradients are ambient Euclidean partials of a smooth extension; callers
    convert them with :meth:`egrad_to_rgrad`.
    """

    curved = True

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.ambient_dim = dim + 1

    def __repr__(self):
        return f"Lorentz({self.dim})"

    @property
    def name(self):
        return "hyperbolic"

    def origin(self):
        return origin(self.dim)

    def distance(self, x, z):
        return distance(x, z)

    def sqdist(self, X, Z):
        rho = pairwise_distance(X, Z)
        return rho**2

    def sqdist_vjp(self, X, Z, dW):
        """Pull back dL/dW (W = pairwise squared distances) to dL/dX, dL/dZ."""
        rho = pairwise_distance(X, Z)
        # dW/du with u = -<x, z>_L
        S = dW * 2.0 * rho_over_sinh(rho)
        G = metric_tensor(self.dim)
        dX = -(S @ Z) @ G
        dZ = -(S.T @ X) @ G
        return dX, dZ

    def local_steps(self, Xa, Xb):
        return local_log(Xa, Xb)

    def local_steps_vjp(self, Xa, Xb, dU):
        x, z = Xa, Xb
        e = _cosh_minus_one(x, z)
        rho = 2.0 * np.arcsinh(np.sqrt(0.5 * e))
        a = 1.0 + e
        f = rho_over_sinh(rho)
        fp = drho_over_sinh(rho)
        denom = 1.0 + x[..., 0]
        c = (z[..., 0] + a) / denom
        q = z[..., 1:] - x[..., 1:] * c[..., None]

        dx = np.zeros_like(x)
        dz = np.zeros_like(z)
        da = fp * np.sum(dU * q, axis=-1)
        p = f[..., None] * dU
        dz[..., 1:] += p
        dx[..., 1:] -= p * c[..., None]
        dc = -np.sum(p * x[..., 1:], axis=-1)
        dz[..., 0] += dc / denom
        da = da + dc / denom
        dx[..., 0] -= dc * (z[..., 0] + a) / denom**2
        G = metric_tensor(self.dim)
        dx -= da[..., None] * (z @ G)
        dz -= da[..., None] * (x @ G)
        return dx, dz

    def log_volume(self, Xa, Xb):
        """log r = (D - 1) log(rho / sinh rho) for each consecutive pair."""
        rho = distance(Xa, Xb)
        return (self.dim - 1) * np.log(rho_over_sinh(rho))

    def log_volume_vjp(self, Xa, Xb, dl):
        rho = distance(Xa, Xb)
        da = dl * (self.dim - 1) * drho_over_sinh(rho) / rho_over_sinh(rho)
        G = metric_tensor(self.dim)
        return -da[..., None] * (Xb @ G), -da[..., None] * (Xa @ G)

    def exp_local(self, x, v):
        return exp_local(x, v)

    def from_origin_local(self, V):
        """Points exp_mu0(V) with V given in local coordinates at the origin."""
        r = np.linalg.norm(V, axis=-1, keepdims=True)
        return np.concatenate([np.cosh(r), sinh_over_rho(r) * V], axis=-1)

    def from_origin_local_vjp(self, V, dX):
        r = np.linalg.norm(V, axis=-1, keepdims=True)
        s = sinh_over_rho(r)
        sp = dsinh_over_rho(r)
        g0 = dX[..., :1]
        g = dX[..., 1:]
        return g0 * s * V + s * g + sp * np.sum(V * g, axis=-1, keepdims=True) * V

    def egrad_to_rgrad(self, X, egrad):
        G = metric_tensor(self.dim)
        return project_to_tangent(X, egrad @ G)

    def retract(self, X, U):
        return expmap(X, U)

    def to_local(self, X, U):
        return to_local(X, U)

    def to_ambient(self, X, V):
        return to_ambient(X, V)

    def transport_local(self, X, Y, V):
        """Transport local-coordinate vectors from T_X to T_Y."""
        return to_local(Y, parallel_transport(X, Y, to_ambient(X, V)))

    def inner(self, X, U, W):
        return lorentz_inner(U, W)

    def logmap(self, x, z):
        return logmap(x, z)

    def expmap(self, x, u):
        return expmap(x, u)

    def projector(self, x):
        return projector(x)

    def normalize(self, X):
        return renormalize(X)

    def geodesic(self, x, z, ts):
        return geodesic(x, z, ts)

    def to_plot(self, X):
        return poincare_from_lorentz(X)


class Euclidean:
    """The same primitives for R^D, used by the GPLVM / GPDM baselines."""

    curved = False

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.ambient_dim = dim

    def __repr__(self):
        return f"Euclidean({self.dim})"

    @property
    def name(self):
        return "euclidean"

    def origin(self):
        return np.zeros(self.dim)

    def distance(self, x, z):
        return np.linalg.norm(np.asarray(x) - np.asarray(z), axis=-1)

    def sqdist(self, X, Z):
        diff = X[:, None, :] - Z[None, :, :]
        return np.sum(diff**2, axis=-1)

    def sqdist_vjp(self, X, Z, dW):
        dX = 2.0 * (dW.sum(axis=1)[:, None] * X - dW @ Z)
        dZ = 2.0 * (dW.sum(axis=0)[:, None] * Z - dW.T @ X)
        return dX, dZ

    def local_steps(self, Xa, Xb):
        return np.asarray(Xb, dtype=float) - np.asarray(Xa, dtype=float)

    def local_steps_vjp(self, Xa, Xb, dU):
        return -dU, dU

    def log_volume(self, Xa, Xb):
        return np.zeros(np.shape(Xa)[:-1])

    def log_volume_vjp(self, Xa, Xb, dl):
        return np.zeros_like(Xa, dtype=float), np.zeros_like(Xb, dtype=float)

    def exp_local(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def from_origin_local(self, V):
        return np.array(V, dtype=float)

    def from_origin_local_vjp(self, V, dX):
        return dX

    def egrad_to_rgrad(self, X, egrad):
        return egrad

    def retract(self, X, U):
        return X + U

    def to_local(self, X, U):
        return U

    def to_ambient(self, X, V):
        return V

    def transport_local(self, X, Y, V):
        return V

    def inner(self, X, U, W):
        return np.sum(U * W, axis=-1)

    def logmap(self, x, z):
        return np.asarray(z) - np.asarray(x)

    def expmap(self, x, u):
        return np.asarray(x) + np.asarray(u)

    def projector(self, x):
        return np.eye(self.dim)

    def normalize(self, X):
        return X

    def geodesic(self, x, z, ts):
        ts = np.asarray(ts, dtype=float)[:, None]
        return (1.0 - ts) * x + ts * z

    def to_plot(self, X):
        return X


def make_geometry(kind: str, dim: int):
    if kind in ("hyperbolic", "lorentz"):
        return Lorentz(dim)
    if kind == "euclidean":
        return Euclidean(dim)
    raise ValueError(f"unknown geometry {kind!r}")
