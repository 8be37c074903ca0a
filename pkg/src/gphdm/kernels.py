"""Squared-exponential kernels on R^D, H^2 and H^3.

Every kernel is stationary, so it is written as a *profile* of the squared
geodesic distance ``w = rho**2``. Working in ``w`` keeps all derivatives
finite at coincident points (the profiles are even in ``rho``). A profile
returns values for unit variance; the variance multiplies outside.

The H^3 kernel has a closed form. The H^2 kernel is an integral over the
distance; pointwise evaluation uses adaptive quadrature, while Gram matrices
inside training loops read from a per-lengthscale cubic spline in ``w``
built by composite Gauss-Legendre quadrature (see :class:`HeatProfile2`).
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import integrate, interpolate, linalg

from .errors import FactorizationError, QuadratureError, ValidationError
from .manifold import distance, metric_tensor, projector, rho_over_sinh

# Beyond s = kappa * _TAIL the Gaussian factor drops below 1e-16.
_TAIL = np.sqrt(2.0 * np.log(1e16))


@dataclass(frozen=True)
class KernelParams:
    lengthscale: float
    variance: float = 1.0
    jitter: float = 1e-6
    quadrature_tolerance: float = 1e-7

    def __post_init__(self):
        if not self.lengthscale > 0 or not self.variance > 0:
            raise ValidationError("lengthscale and variance must be positive")
        if self.jitter < 0:
            raise ValidationError("jitter must be non-negative")


class SEProfile:
    """exp(-w / (2 kappa^2))."""

    kind = "euclidean"

    def evaluate(self, w, lengthscale):
        """Return (k, dk/dw, dk/dlog(lengthscale)) at unit variance."""
        w = np.asarray(w, dtype=float)
        l2 = lengthscale**2
        k = np.exp(-0.5 * w / l2)
        return k, -0.5 * k / l2, k * w / l2

    def value(self, w, lengthscale):
        return self.evaluate(w, lengthscale)[0]

    def second_derivative_at_zero(self, lengthscale):
        return 0.25 / lengthscale**4


class HeatProfile3:
    """(rho / sinh rho) exp(-rho^2 / (2 kappa^2)); normalized to 1 at rho = 0."""

    kind = "h3"

    def evaluate(self, w, lengthscale):
        w = np.asarray(w, dtype=float)
        rho = np.sqrt(np.maximum(w, 0.0))
        l2 = lengthscale**2
        g = rho_over_sinh(rho)
        e = np.exp(-0.5 * w / l2)
        k = g * e
        # d g / d w = g'(rho) / (2 rho)
        dg_dw = _dg_dw(rho)
        return k, (dg_dw - 0.5 * g / l2) * e, k * w / l2

    def value(self, w, lengthscale):
        return self.evaluate(w, lengthscale)[0]

    def second_derivative_at_zero(self, lengthscale):
        # g(w) = 1 - w/6 + 7 w^2/360, e(w) = 1 - w/(2 l2) + w^2/(8 l2^2)
        l2 = lengthscale**2
        return 2.0 * (7.0 / 360 + 1.0 / (12.0 * l2) + 1.0 / (8.0 * l2**2))


_DG_DW = (-1.0 / 6, 7.0 / 180, -31.0 / 5040, 127.0 / 151200, -73.0 / 684288)


def _dg_dw(rho):
    small = rho < 0.1
    safe = np.where(small, 1.0, rho)
    exact = (np.sinh(safe) - safe * np.cosh(safe)) / (2.0 * safe * np.sinh(safe) ** 2)
    r2 = rho**2
    series = np.zeros_like(r2)
    for c in reversed(_DG_DW):
        series = series * r2 + c
    return np.where(small, series, exact)


def _h2_integrand(t, rho, lengthscale):
    """Integrand after substituting s = rho + t^2, plus its log-lengthscale derivative."""
    s = rho + t * t
    # cosh(s) - cosh(rho) = 2 sinh(rho + t^2/2) sinh(t^2/2)
    den = np.sqrt(2.0 * np.sinh(rho + 0.5 * t * t) * np.sinh(0.5 * t * t))
    l2 = lengthscale**2
    f = 2.0 * t * s * np.exp(-0.5 * s * s / l2) / den
    return f, f * s * s / l2


def h2_integral_adaptive(rho, lengthscale, tol=1e-7):
    """The un-normalized H^2 integral at a single distance, by adaptive quadrature."""
    upper = lengthscale * _TAIL
    if rho >= upper:
        return 0.0
    top = np.sqrt(upper - rho)
    # quad never evaluates the endpoints, where the integrand is 0/0 at t = 0
    val, err, info = integrate.quad(
        lambda t: _h2_integrand(t, rho, lengthscale)[0],
        0.0,
        top,
        epsabs=0.0,
        epsrel=tol,
        limit=200,
        full_output=True,
    )[:3]
    if err > max(tol * abs(val), 1e-300) and info.get("ier", 0) != 0:
        raise QuadratureError(f"H2 kernel quadrature did not converge at rho={rho}")
    return val


_GL_ORDER = 16
_GL_PANELS = 10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def h2_integral_table(rho, lengthscale):
    """Vectorized composite Gauss-Legendre evaluation of the H^2 integral.

    Returns the integral and its derivative with respect to log(lengthscale).
    Panels are clustered quadratically towards t = 0, where the integrand
    varies on the scale sqrt(rho).
    """
    rho = np.asarray(rho, dtype=float)
    upper = lengthscale * _TAIL
    top = np.sqrt(np.maximum(upper - rho, 0.0))
    edges = np.linspace(0.0, 1.0, _GL_PANELS + 1) ** 2
    lo, hi = edges[:-1], edges[1:]
    # unit-interval nodes, shape (panels, order)
    u = 0.5 * (hi - lo)[:, None] * (_GL_NODES[None, :] + 1.0) + lo[:, None]
    wts = 0.5 * (hi - lo)[:, None] * _GL_WEIGHTS[None, :]
    t = top[..., None, None] * u
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        f, fk = _h2_integrand(t, rho[..., None, None], lengthscale)
    f = np.nan_to_num(f)
    fk = np.nan_to_num(fk)
    scale = top[..., None, None]
    val = np.sum(f * wts * scale, axis=(-2, -1))
    dval = np.sum(fk * wts * scale, axis=(-2, -1))
    return val, dval


def _horner(c, idx, dx):
    out = c[0, idx]
    for row in c[1:]:
        out = out * dx + row[idx]
    return out


class HeatProfile2:
    """H^2 heat-type SE kernel, normalized to 1 at rho = 0.

    Splines over ``w`` are cached per lengthscale. The cache is guarded by a
    lock; concurrent builders for the same lengthscale produce identical
    tables, so the fill is idempotent.
    """

    kind = "h2"

    def __init__(self, n_grid: int = 1024, cache_size: int = 32):
        self.n_grid = n_grid
        self.cache_size = cache_size
        self._cache: OrderedDict[float, tuple] = OrderedDict()
        self._lock = threading.Lock()

    def _tables(self, lengthscale):
        key = float(lengthscale)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        frac = np.linspace(0.0, _TAIL, self.n_grid)

        def node_values(ell):
            val = h2_integral_table(frac * ell, ell)[0]
            return val / val[0], val[0]

        k, c0 = node_values(lengthscale)
        w = (frac * lengthscale) ** 2
        k_spline = interpolate.CubicSpline(w, k)
        kw_spline = k_spline.derivative()
        # The grid scales with l and a not-a-knot spline is invariant under
        # rescaling its nodes, so the log-lengthscale derivative of the
        # *interpolant* is spline(d k_j / dlog l) - 2 w S'(w). Differentiating
        # the interpolant (not the integral) keeps gradients exact for the
        # kernel actually evaluated. Node derivatives: central FD, whose
        # O(h^2) ~ 1e-8 error sits far below the spline's own accuracy.
        h = 1e-4
        kp = node_values(lengthscale * np.exp(h))[0]
        km = node_values(lengthscale * np.exp(-h))[0]
        dk_nodes = (kp - km) / (2.0 * h)
        node_spline = interpolate.CubicSpline(w, dk_nodes)
        kl_spline = interpolate.PPoly(node_spline.c.copy(), w)
        # subtract 2 w S'(w), written per interval in powers of (w - w_i)
        dc = kw_spline.c  # quadratic pieces a dx^2 + b dx + c
        wi = w[:-1]
        kl_spline.c[0] -= 2.0 * dc[0]
        kl_spline.c[1] -= 2.0 * (dc[1] + wi * dc[0])
        kl_spline.c[2] -= 2.0 * (dc[2] + wi * dc[1])
        kl_spline.c[3] -= 2.0 * wi * dc[2]
        tables = (w[-1], k_spline, kw_spline, k_spline.derivative(2), kl_spline, c0)
        with self._lock:
            self._cache[key] = tables
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return tables

    def normalizer(self, lengthscale):
        """C_inf, the un-normalized integral at rho = 0."""
        return self._tables(lengthscale)[5]

    def evaluate(self, w, lengthscale):
        w = np.asarray(w, dtype=float)
        w_max, k_s, kw_s, _, kl_s, _ = self._tables(lengthscale)
        inside = w < w_max
        wc = np.minimum(w, w_max)
        # one interval search shared by the three piecewise cubics
        x = k_s.x
        idx = np.clip(np.searchsorted(x, wc, side="right") - 1, 0, len(x) - 2)
        dx = wc - x[idx]
        k, kw, kl = (np.where(inside, _horner(s.c, idx, dx), 0.0) for s in (k_s, kw_s, kl_s))
        return k, kw, kl

    def value(self, w, lengthscale):
        return self.evaluate(w, lengthscale)[0]

    def second_derivative_at_zero(self, lengthscale):
        return float(self._tables(lengthscale)[3](0.0))


_PROFILES = {"euclidean": SEProfile(), "h3": HeatProfile3(), "h2": HeatProfile2()}


def get_profile(kind: str):
    try:
        return _PROFILES[kind]
    except KeyError:
        raise ValidationError(
            f"unsupported kernel kind {kind!r}; hyperbolic kernels exist for D in {{2, 3}}"
        ) from None


def kind_for(geometry) -> str:
    if not geometry.curved:
        return "euclidean"
    if geometry.dim in (2, 3):
        return f"h{geometry.dim}"
    raise ValidationError(f"no hyperbolic SE kernel implemented for D={geometry.dim}")


def se_kernel_euclidean(x, z, p: KernelParams):
    w = np.sum((np.asarray(x, float) - np.asarray(z, float)) ** 2, axis=-1)
    return p.variance * SEProfile().value(w, p.lengthscale)


def se_kernel_h3(x, z, p: KernelParams):
    _check_dim(x, 3)
    rho = distance(x, z)
    return p.variance * _PROFILES["h3"].value(rho**2, p.lengthscale)


def se_kernel_h2(x, z, p: KernelParams):
    """H^2 kernel between single points by adaptive quadrature."""
    _check_dim(x, 2)
    rho = float(distance(x, z))
    c0 = h2_integral_adaptive(0.0, p.lengthscale, p.quadrature_tolerance)
    val = h2_integral_adaptive(rho, p.lengthscale, p.quadrature_tolerance)
    return p.variance * val / c0


def _check_dim(x, dim):
    if np.shape(x)[-1] != dim + 1:
        raise ValidationError(f"expected points of H^{dim} with {dim + 1} coordinates")


def squared_distances(X, Z, kind):
    X = np.atleast_2d(np.asarray(X, float))
    Z = np.atleast_2d(np.asarray(Z, float))
    if kind == "euclidean":
        return np.sum((X[:, None, :] - Z[None, :, :]) ** 2, axis=-1)
    return distance(X[:, None, :], Z[None, :, :]) ** 2


def cross_kernel(X, Z, p: KernelParams, kind: str):
    """k(X, Z) without jitter."""
    return p.variance * get_profile(kind).value(squared_distances(X, Z, kind), p.lengthscale)


def gram(points, p: KernelParams, kind: str):
    """Symmetric Gram matrix with jitter * variance on the diagonal.

    Raises :class:`FactorizationError` if the matrix cannot be factorized
    after three tenfold jitter escalations.
    """
    K = cross_kernel(points, points, p, kind)
    K = 0.5 * (K + K.T)
    _, jitter = jittered_cholesky(K, p.jitter * p.variance)
    return K + jitter * np.eye(len(K))


def jittered_cholesky(K, jitter, escalations: int = 3):
    """Lower Cholesky factor of K + jitter I, escalating the jitter on failure."""
    eye = np.eye(len(K))
    for attempt in range(escalations + 1):
        try:
            return linalg.cholesky(K + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            jitter = max(jitter, 1e-12) * 10.0
    raise FactorizationError("Cholesky factorization failed after jitter escalation")


def kernel_grad(x_star, X, p: KernelParams, kind: str):
    """Matrix (D+1) x N of partials d k(x*, x_n) / d x* in ambient coordinates."""
    x_star = np.asarray(x_star, float)
    X = np.atleast_2d(np.asarray(X, float))
    w = squared_distances(x_star[None, :], X, kind)[0]
    _, kw, _ = get_profile(kind).evaluate(w, p.lengthscale)
    kw = p.variance * kw
    if kind == "euclidean":
        return (2.0 * (x_star[None, :] - X) * kw[:, None]).T
    rho = np.sqrt(w)
    # w = arccosh(u)^2 with u = -<x*, x_n>_L, dw/du = 2 rho / sinh rho, du/dx* = -G x_n
    coef = kw * 2.0 * rho_over_sinh(rho)
    G = metric_tensor(X.shape[1] - 1)
    return -(X @ G).T * coef[None, :]


def kernel_hess_diag(x_star, p: KernelParams, kind: str):
    """d^2 k(x, x') / dx dx'^T evaluated at x = x' = x*."""
    x_star = np.asarray(x_star, float)
    prof = get_profile(kind)
    _, kw0, _ = prof.evaluate(np.zeros(1), p.lengthscale)
    kw0 = float(kw0[0]) * p.variance
    if kind == "euclidean":
        return -2.0 * kw0 * np.eye(x_star.shape[-1])
    kww0 = prof.second_derivative_at_zero(p.lengthscale) * p.variance
    G = metric_tensor(x_star.shape[-1] - 1)
    # k as a function of u = -<x, x'>: k_u(1) = 2 k_w(0), k_uu(1) = 4 k_ww(0) - (2/3) k_w(0)
    k_u = 2.0 * kw0
    k_uu = 4.0 * kww0 - (2.0 / 3.0) * kw0
    gx = G @ x_star
    return k_uu * np.outer(gx, gx) - k_u * G


def tangent_projected(x_star, M):
    P = projector(x_star)
    return P @ M @ P.T
