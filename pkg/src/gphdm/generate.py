"""Generating new latent trajectories from a trained model.

Three mechanisms:

* :func:`mean_predict` rolls the dynamics forward, taking at every step the
  most likely next point of the conditional (wrapped) Gaussian.
* :func:`conditional_optimize` fills in the free points between anchors by
  maximizing the conditional dynamics prior (optionally with the decoder
  uncertainty term).
* :func:`pullback_geodesic` minimizes the curve energy under the expected
  pullback metric of the decoder, which keeps paths near the data.

:func:`hyperbolic_geodesic` is the plain baseline the last one is compared to.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from . import __version__
from .errors import DivergenceError, FactorizationError, ValidationError
from .kernels import get_profile, jittered_cholesky
from .manifold import drho_over_sinh, metric_tensor, rho_over_sinh
from .model import LatentModel, _kernel_block, dynamics_terms, likelihood_terms
from .optim import MinimizeConfig, ParameterBlock, minimize

log = logging.getLogger(__name__)


@dataclass
class GeneratedPath:
    latents: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    method: str
    geometry: str = "hyperbolic"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.latents = np.atleast_2d(np.asarray(self.latents, dtype=float))
        if len(self.latents) < 2:
            raise ValidationError("a path needs at least 2 points")
        if self.mean is not None and (len(self.mean) != len(self.latents)
                                      or np.shape(self.mean) != np.shape(self.variance)):
            raise ValidationError("decoded arrays do not match the latent path")

    @property
    def n_points(self):
        return len(self.latents)

    @property
    def mean_variance(self):
        """Scalar uncertainty summary: decoded variance averaged over the path."""
        return float(np.mean(self.variance))

    def poincare(self):
        if self.geometry != "hyperbolic":
            return self.latents
        return self.latents[:, 1:] / (1.0 + self.latents[:, :1])

    def to_dict(self):
        return {
            "method": self.method,
            "geometry": self.geometry,
            "version": __version__,
            "latents": self.latents.tolist(),
            "mean": None if self.mean is None else np.asarray(self.mean).tolist(),
            "variance": None if self.variance is None else np.asarray(self.variance).tolist(),
            "mean_variance": None if self.variance is None else self.mean_variance,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def write_csv(self, path):
        X, P = self.latents, self.poincare()
        dy = 0 if self.mean is None else self.mean.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step"] + [f"x{i}" for i in range(X.shape[1])] + [f"p{i}" for i in range(P.shape[1])]
                       + [f"y{i + 1}" for i in range(dy)] + [f"var{i + 1}" for i in range(dy)])
            for i in range(len(X)):
                row = [i] + list(X[i]) + list(P[i])
                if dy:
                    row += list(self.mean[i]) + list(self.variance[i])
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decoded(model, X, method, **diagnostics):
    mean, var = model.decode(X) if model is not None else (None, None)
    geometry = model.config.geometry if model is not None else "hyperbolic"
    return GeneratedPath(X, mean, var, method, geometry, diagnostics)


# --- recursive generation --------------------------------------------------------


class DynamicsPredictor:
    """Conditional of the learned dynamics GP given all training transitions."""

    def __init__(self, model: LatentModel):
        s = model.state
        self.model = model
        self.geometry = model.geometry
        self.profile = get_profile(model.kind)
        self.Xin, self.U, K = model.training_dynamics()
        self.variance = s.kx_variance
        self.lengthscale = s.kx_lengthscale
        self.jitter = model.config.jitter
        self.noise = np.broadcast_to(np.asarray(s.noise_x, dtype=float), (self.geometry.dim,))
        n = len(self.Xin)
        self.factors = []
        for d in range(self.geometry.dim):
            L, _ = jittered_cholesky(K + self.noise[d] * np.eye(n), 0.0)
            self.factors.append((L, linalg.cho_solve((L, True), self.U[:, d])))

    def predict(self, x):
        """Mean and diagonal covariance (local coordinates) of the next step from ``x``."""
        x = np.atleast_2d(x)
        w = self.geometry.sqdist(x, self.Xin)
        ks = self.variance * self.profile.value(w, self.lengthscale)
        prior = self.variance * (1.0 + self.jitter)
        m = np.empty((len(x), self.geometry.dim))
        var = np.empty_like(m)
        for d, (L, alpha) in enumerate(self.factors):
            m[:, d] = ks @ alpha
            v = linalg.solve_triangular(L, ks.T, lower=True)
            var[:, d] = np.maximum(prior - np.sum(v**2, axis=0), 1e-12)
        return m, var


def step_objective(v, m, var, dim):
    """Negative log of N(v; m, diag(var)) * r with r = (rho / sinh rho)^(D-1), rho = |v|."""
    rho = np.linalg.norm(v)
    f = rho_over_sinh(rho)
    val = 0.5 * np.sum((v - m) ** 2 / var) - (dim - 1) * np.log(f)
    # d log f / dv = f'(rho) / (f rho) v, and f' / rho = (f' / sinh) / f
    grad = (v - m) / var - (dim - 1) * (drho_over_sinh(rho) / f**2) * v
    return val, grad


def step_mle(m, var, dim, maxiter=200, gtol=1e-7):
    """Maximize the conditional step density, starting from its Gaussian mode ``m``.

    The problem is D-dimensional and smooth, so a quasi-Newton solver is
    run in whitened normal coordinates z = (v - m) / sqrt(var) at the
    current point.
    """
    m = np.asarray(m, float)
    sd = np.sqrt(np.asarray(var, float))
    if dim == 1:
        return m.copy(), True

    def f(z):
        val, grad = step_objective(m + sd * z, m, var, dim)
        return val, grad * sd

    res = optimize.minimize(f, np.zeros_like(m), jac=True, method="BFGS",
                            options={"maxiter": maxiter, "gtol": gtol})
    ok = bool(res.success) or float(np.linalg.norm(res.jac)) < 10 * gtol
    return m + sd * res.x, ok


def mean_predict(model: LatentModel, x_start, steps: int) -> GeneratedPath:
    """Roll the dynamics forward ``steps`` times from ``x_start``.

    Each step maximizes the conditional density of the next point. Under a
    Euclidean latent space this is exactly the GP mean recursion.
    """
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    g = model.geometry
    pred = DynamicsPredictor(model)
    X = [np.asarray(x_start, dtype=float)]
    logdens, converged = [], True
    for _ in range(steps):
        m, var = pred.predict(X[-1])
        if g.curved:
            v, ok = step_mle(m[0], var[0], g.dim)
        else:
            v, ok = m[0], True
        val, _ = step_objective(v, m[0], var[0], g.dim if g.curved else 1)
        logdens.append(-val - 0.5 * np.sum(np.log(2 * np.pi * var[0])))
        X.append(g.normalize(g.exp_local(X[-1], v)) if g.curved else X[-1] + v)
        if not ok:
            converged = False
            log.warning("step optimization did not converge; returning partial path")
            break
    return _decoded(model, np.array(X), "mean", step_log_density=logdens, converged=converged)


def _augmented(model, Xs):
    Xall = np.concatenate([model.X, Xs], axis=0)
    segs = list(model.segments) + [(len(model.X), len(Xall))]
    return Xall, segs


def conditional_terms(model: LatentModel, Xs, use_likelihood=True):
    """log p(X* | X) (plus -D_y/2 log|Sigma*|) and its gradient w.r.t. X*.

    Both pieces are differences between a joint quantity over training and
    new points and the training-only one; the training-only part is a
    constant and dropped.
    """
    s = model.state
    cfg = model.config
    g = model.geometry
    N = len(model.X)
    Xall, segs = _augmented(model, Xs)
    val, dX, *_ = dynamics_terms(g, model.kind, Xall, segs, s.kx_lengthscale, s.kx_variance,
                                 s.noise_x, cfg.prior_spread, cfg.jitter, start_prior=False)
    grad = dX[N:]
    if use_likelihood:
        zeros = np.zeros((len(Xall), model.Y.shape[1]))
        lv, ldX, *_ = likelihood_terms(g, model.kind, Xall, zeros, s.ky_lengthscale, s.ky_variance,
                                       s.noise_y, cfg.jitter)
        val += lv
        grad = grad + ldX[N:]
    return val, grad


def conditional_log_density(model, Xs, use_likelihood=False):
    """Conditional objective up to a constant; comparable between paths of equal length."""
    return conditional_terms(model, np.atleast_2d(Xs), use_likelihood)[0]


def _anchored_init(model, anchors, M):
    g = model.geometry
    X = np.empty((M, g.dim + 1 if g.curved else g.dim))
    for (i0, x0), (i1, x1) in zip(anchors[:-1], anchors[1:]):
        ts = np.linspace(0.0, 1.0, i1 - i0 + 1)
        X[i0:i1 + 1] = g.geodesic(np.asarray(x0, float), np.asarray(x1, float), ts)
    return X


def _check_anchors(anchors, M):
    anchors = sorted(((int(i), np.asarray(x, float)) for i, x in anchors), key=lambda a: a[0])
    idx = [i for i, _ in anchors]
    if M < 2:
        raise ValidationError("M must be at least 2")
    if not idx or idx[0] != 0 or idx[-1] != M - 1:
        raise ValidationError("anchors must include index 0 and M-1")
    if len(set(idx)) != len(idx):
        raise ValidationError("anchor indices must be strictly increasing")
    return anchors


def conditional_optimize(model: LatentModel, anchors, M: int, use_likelihood=True,
                         config: MinimizeConfig | None = None, lr=None) -> GeneratedPath:
    """Fill the free points of an M-point path between anchors.

    ``anchors`` is a list of ``(index, point)`` and must contain 0 and M-1.
    Segments start as geodesics between consecutive anchors.
    """
    anchors = _check_anchors(anchors, M)
    g = model.geometry
    X0 = _anchored_init(model, anchors, M)
    fixed = np.zeros(M, dtype=bool)
    fixed[[i for i, _ in anchors]] = True
    free = np.nonzero(~fixed)[0]
    _warn_if_against_flow(model, X0)
    if free.size == 0:
        val = conditional_log_density(model, X0, use_likelihood)
        return _decoded(model, X0, "conditional", objective=val, log_density=val, iterations=0)

    def loss(values):
        X = X0.copy()
        X[free] = values["X"]
        val, grad = conditional_terms(model, X, use_likelihood)
        return -val, {"X": -grad[free]}

    if lr is None:
        step = np.mean(g.distance(X0[1:], X0[:-1])) if g.curved else np.mean(np.linalg.norm(np.diff(X0, axis=0), axis=1))
        lr = max(0.05 * step, 1e-4)
    kind = "lorentz" if g.curved else "real"
    res = minimize(loss, {"X": ParameterBlock(kind, X0[free], lr)},
                   config or MinimizeConfig(max_iters=500, grad_tol=1e-6, patience=100))
    X = X0.copy()
    X[free] = res.values["X"]
    return _decoded(model, X, "conditional", objective=-res.loss,
                    log_density=conditional_log_density(model, X, False),
                    iterations=res.iterations, trace=res.trace)


def _warn_if_against_flow(model, X):
    """Warn when the requested direction opposes the learned flow at the start."""
    try:
        pred = DynamicsPredictor(model)
        m, _ = pred.predict(X[0])
    except FactorizationError:
        return
    want = model.geometry.local_steps(X[:1], X[1:2])[0]
    # where branches meet, the predicted step is short and its direction meaningless
    typical = float(np.median(np.linalg.norm(pred.U, axis=1)))
    if np.linalg.norm(m) > 0.25 * typical and float(m[0] @ want) < 0:
        warnings.warn(
            "conditional target opposes the training flow; consider training on "
            "reversed motions as well (augment_reverse)",
            stacklevel=3,
        )


# --- pullback metric ---------------------------------------------------------------


class PullbackMetric:
    """Expected pullback metric E[J^T J] of the decoder GP at latent points.

    Matrices live in ambient coordinates and act on tangent vectors; the
    normal direction x* is in their null space.
    """

    def __init__(self, model: LatentModel):
        s = model.state
        self.model = model
        self.geometry = model.geometry
        self.profile = get_profile(model.kind)
        self.X = model.X
        self.variance = s.ky_variance
        self.lengthscale = s.ky_lengthscale
        K, *_ = _kernel_block(self.geometry, model.kind, self.X, s.ky_lengthscale, s.ky_variance,
                              model.config.jitter)
        self.L, _ = jittered_cholesky(K + s.noise_y * np.eye(len(self.X)), 0.0)
        self.alpha = linalg.cho_solve((self.L, True), model.Y)
        self.Dy = model.Y.shape[1]
        self._hess = self._hess_diag()
        self.cache = {}

    def _hess_diag(self):
        prof = self.profile
        kw0 = float(prof.evaluate(np.zeros(1), self.lengthscale)[1][0]) * self.variance
        if not self.geometry.curved:
            return lambda x: -2.0 * kw0 * np.eye(self.geometry.dim)
        kww0 = prof.second_derivative_at_zero(self.lengthscale) * self.variance
        G = metric_tensor(self.geometry.dim)

        def hess(x):
            gx = x @ G
            return (4.0 * kww0 - (2.0 / 3.0) * kw0) * np.einsum("pi,pj->pij", gx, gx) - 2.0 * kw0 * G

        return hess

    def kernel_grads(self, xs):
        """(P, N, A) partials d k(x*_p, x_n) / d x*_p in ambient coordinates."""
        xs = np.atleast_2d(xs)
        w = self.geometry.sqdist(xs, self.X)
        _, kw, _ = self.profile.evaluate(w, self.lengthscale)
        kw = self.variance * kw
        if not self.geometry.curved:
            return 2.0 * (xs[:, None, :] - self.X[None, :, :]) * kw[..., None]
        G = metric_tensor(self.geometry.dim)
        coef = kw * 2.0 * rho_over_sinh(np.sqrt(w))
        return -coef[..., None] * (self.X @ G)[None, :, :]

    def jacobian(self, xs):
        """Mean Jacobian mu_J (P, D_y, A) and its shared covariance Sigma_J (P, A, A)."""
        xs = np.atleast_2d(xs)
        Kg = self.kernel_grads(xs)
        mu = np.einsum("nk,pna->pka", self.alpha, Kg)
        P, N, A = Kg.shape
        V = linalg.solve_triangular(self.L, Kg.transpose(1, 0, 2).reshape(N, P * A), lower=True)
        V = V.reshape(N, P, A)
        cov = self._hess(xs) - np.einsum("npa,npb->pab", V, V)
        return mu, cov

    def projectors(self, xs):
        """Tangent projectors u -> u + <x, u>_L x as (P, A, A) matrices."""
        xs = np.atleast_2d(xs)
        A = xs.shape[1]
        if not self.geometry.curved:
            return np.broadcast_to(np.eye(A), (len(xs), A, A))
        G = metric_tensor(self.geometry.dim)
        return np.eye(A)[None] + np.einsum("pi,pj->pij", xs, xs @ G)

    def __call__(self, xs):
        xs = np.atleast_2d(xs)
        mu, cov = self.jacobian(xs)
        inner = np.einsum("pka,pkb->pab", mu, mu) + self.Dy * cov
        Pm = self.projectors(xs)
        M = np.einsum("pia,pij,pjb->pab", Pm, inner, Pm)
        return 0.5 * (M + M.transpose(0, 2, 1))


def expected_pullback_metric(model: LatentModel, x_star):
    """E[G^P] at one latent point, (D+1) x (D+1) on the hyperboloid."""
    return PullbackMetric(model)(np.asarray(x_star, float))[0]


# --- geodesics -----------------------------------------------------------------------


def hyperbolic_geodesic(x_a, x_b, M: int, model: LatentModel | None = None, geometry=None) -> GeneratedPath:
    """M points at uniform fractions of the geodesic from x_a to x_b."""
    if M < 2:
        raise ValidationError("M must be at least 2")
    if geometry is None:
        geometry = model.geometry if model is not None else _default_geometry(x_a)
    X = geometry.geodesic(np.asarray(x_a, float), np.asarray(x_b, float), np.linspace(0.0, 1.0, M))
    X[0], X[-1] = x_a, x_b
    return _decoded(model, X, "geodesic", length=float(geometry.distance(x_a, x_b)))


def _default_geometry(x):
    from .manifold import Lorentz

    return Lorentz(len(x) - 1)


def curve_terms(geometry, X, metric, lam):
    """Per-segment energies v^T G v and per-interior-point spline energies.

    Each segment averages the metric at both of its ends (trapezoid rule),
    with the step expressed in the tangent space where the metric acts.
    """
    Gm = metric(X)
    V = geometry.logmap(X[:-1], X[1:])
    W = geometry.logmap(X[1:], X[:-1])
    seg = 0.5 * (np.einsum("pa,pab,pb->p", V, Gm[:-1], V) + np.einsum("pa,pab,pb->p", W, Gm[1:], W))
    mid = geometry.geodesic_midpoints(X[:-2], X[2:]) if hasattr(geometry, "geodesic_midpoints") else \
        _midpoints(geometry, X[:-2], X[2:])
    spl = lam * geometry.distance(X[1:-1], mid) ** 2
    return seg, spl


def _midpoints(geometry, a, b):
    if not geometry.curved:
        return 0.5 * (a + b)
    return geometry.normalize(geometry.expmap(a, 0.5 * geometry.logmap(a, b)))


def curve_energy(geometry, X, metric, lam=1.0):
    seg, spl = curve_terms(geometry, X, metric, lam)
    return float(seg.sum()), float(spl.sum())


def _energy_grad(geometry, X, metric, lam, h):
    """Central-difference gradient (local coordinates) for all interior points.

    Points are perturbed in three interleaved colour classes; every energy
    term involves at most one perturbed point, so a full gradient costs
    6 D curve evaluations.
    """
    M = len(X)
    D = geometry.dim
    grad = np.zeros((M, D))
    interior = np.arange(1, M - 1)
    for colour in range(3):
        pts = interior[interior % 3 == colour]
        if pts.size == 0:
            continue
        for d in range(D):
            dv = np.zeros((len(pts), D))
            dv[:, d] = h
            out = []
            for sgn in (1.0, -1.0):
                Xp = X.copy()
                Xp[pts] = geometry.exp_local(X[pts], sgn * dv) if geometry.curved else X[pts] + sgn * dv
                seg, spl = curve_terms(geometry, Xp, metric, lam)
                out.append((seg, spl))
            dseg = (out[0][0] - out[1][0]) / (2 * h)
            dspl = (out[0][1] - out[1][1]) / (2 * h)
            for j in pts:
                # segments j-1, j; spline terms at interior indices j-1, j, j+1 (shifted by 1)
                gsum = dseg[j - 1] + dseg[j]
                gsum += sum(dspl[k - 1] for k in (j - 1, j, j + 1) if 1 <= k <= M - 2)
                grad[j, d] = gsum
    return grad


def pullback_geodesic(model: LatentModel | None, x_a, x_b, M: int = 20, lam: float = 1.0,
                      metric=None, geometry=None, max_iters: int = 500, lr=None,
                      fd_step: float = 1e-6, patience: int = 100) -> GeneratedPath:
    """Minimize E + lam * E_spline over interior points with fixed endpoints.

    ``metric`` maps (P, A) points to (P, A, A) matrices and defaults to the
    model's expected pullback metric. The reported energy is E (M - 1),
    which stays comparable across discretizations.
    """
    if M < 3:
        raise ValidationError("M must be at least 3")
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    if geometry is None:
        geometry = model.geometry if model is not None else _default_geometry(x_a)
    if metric is None:
        metric = PullbackMetric(model)
    x_a = np.asarray(x_a, float)
    x_b = np.asarray(x_b, float)
    X0 = hyperbolic_geodesic(x_a, x_b, M, geometry=geometry).latents
    L0 = float(geometry.distance(x_a, x_b))
    if lr is None:
        lr = max(0.02 * L0 / (M - 1), 1e-5)

    blocks = {"X": ParameterBlock("lorentz" if geometry.curved else "real", X0[1:-1], lr)}
    state = {"rising": 0, "last": np.inf}

    def loss(values):
        X = np.concatenate([x_a[None], values["X"], x_b[None]])
        seg, spl = curve_terms(geometry, X, metric, lam)
        grad_local = _energy_grad(geometry, X, metric, lam, fd_step)[1:-1]
        if geometry.curved:
            # local-coordinate gradient -> ambient vector whose Riemannian form it is
            G = metric_tensor(geometry.dim)
            egrad = geometry.to_ambient(values["X"], grad_local) @ G
        else:
            egrad = grad_local
        return float(seg.sum() + spl.sum()), {"X": egrad}

    def watch(it, value, _values):
        state["rising"] = state["rising"] + 1 if value > state["last"] else 0
        state["last"] = value
        if state["rising"] >= 100:
            raise DivergenceError("curve energy increased for 100 consecutive iterations")

    res = minimize(loss, blocks, MinimizeConfig(max_iters=max_iters, grad_tol=1e-9, patience=patience), watch)
    X = np.concatenate([x_a[None], res.values["X"], x_b[None]])
    E, Es = curve_energy(geometry, X, metric, lam)
    E0, _ = curve_energy(geometry, X0, metric, lam)
    return _decoded(model, X, "pullback", energy=E * (M - 1), spline_energy=Es,
                    initial_energy=E0 * (M - 1), iterations=res.iterations,
                    trace=res.trace, best_trace=res.best_trace, lam=lam)
