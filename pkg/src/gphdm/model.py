"""GPLVM, GPDM, GPHLVM and GPHDM with MAP training.

The four models share one implementation and differ in two switches:
the latent geometry (Euclidean or Lorentz) and whether latents follow the
Markov dynamics prior or an i.i.d. (wrapped) Gaussian prior.

Training maximizes

    beta1 * log p(Y | X) + beta2 * log p(X) - beta3 * stress(X)

with Riemannian Adam. All gradients are analytic (the H^2 kernel derivative
comes from its tabulated spline).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg

from . import __version__
from .data import Dataset, TaxonomyGraph
from .errors import FactorizationError, ValidationError
from .kernels import get_profile, jittered_cholesky, kind_for
from .manifold import make_geometry, metric_tensor, renormalize
from .optim import MinimizeConfig, ParameterBlock, minimize

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gphdm-checkpoint"
CHECKPOINT_VERSION = 1

MODEL_KINDS = {
    "gplvm": ("euclidean", False),
    "gpdm": ("euclidean", True),
    "gphlvm": ("hyperbolic", False),
    "gphdm": ("hyperbolic", True),
}


@dataclass
class ModelConfig:
    geometry: str = "hyperbolic"
    latent_dim: int = 2
    dynamics: bool = True
    back_constraints: bool = False
    beta_likelihood: float = 1.0
    beta_dynamics: float = 1.0
    beta_stress: float = 10.0
    prior_spread: float = 1.0
    lengthscale: float = 1.0
    variance: float = 1.0
    noise_y: float = 0.01
    noise_x: float = 0.01
    jitter: float = 1e-6
    bc_lengthscale: float | None = None
    learn_hyperparameters: bool = True
    lr_latent: float = 5e-3
    lr_hyper: float = 1e-2
    max_iters: int = 1000
    grad_tol: float = 1e-6
    patience: int = 200
    init_restarts: int = 5
    seed: int = 0

    @classmethod
    def for_model(cls, name: str, **overrides):
        try:
            geometry, dynamics = MODEL_KINDS[name]
        except KeyError:
            raise ValidationError(f"unknown model {name!r}") from None
        return cls(geometry=geometry, dynamics=dynamics, **overrides)

    @property
    def name(self):
        for k, v in MODEL_KINDS.items():
            if v == (self.geometry, self.dynamics):
                return k
        return "custom"


@dataclass
class LatentState:
    """Trainable state. Positive quantities are stored as plain values."""

    X: np.ndarray
    ky_lengthscale: float = 1.0
    ky_variance: float = 1.0
    noise_y: float = 0.01
    kx_lengthscale: float = 1.0
    kx_variance: float = 1.0
    noise_x: np.ndarray = field(default_factory=lambda: np.full(2, 0.01))
    W: np.ndarray | None = None

    def copy(self):
        return replace(
            self,
            X=self.X.copy(),
            noise_x=np.array(self.noise_x, dtype=float),
            W=None if self.W is None else self.W.copy(),
        )


# --- Gaussian building blocks ------------------------------------------------


def gaussian_logpdf_shared(K, Y):
    """sum_d log N(Y[:, d]; 0, K) with gradients w.r.t. K and Y."""
    Y = np.atleast_2d(Y.T).T
    n, d = Y.shape
    try:
        cf = linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError("covariance is not positive definite") from exc
    A = linalg.cho_solve(cf, Y)
    Kinv, info = linalg.lapack.dpotri(cf[0], lower=1)
    if info != 0:
        raise FactorizationError("covariance inverse failed")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    val = -0.5 * np.sum(Y * A) - 0.5 * d * logdet - 0.5 * n * d * np.log(2 * np.pi)
    dK = 0.5 * (A @ A.T - d * Kinv)
    return val, dK, -A


def _kernel_block(geometry, kind, X, lengthscale, variance, jitter):
    W = geometry.sqdist(X, X)
    k, kw, kl = get_profile(kind).evaluate(W, lengthscale)
    K = variance * k
    K = 0.5 * (K + K.T) + jitter * variance * np.eye(len(X))
    return K, W, kw, kl


def _kernel_backward(geometry, X, dK, W, kw, kl, K, variance):
    """Push dL/dK through k(X, X) to latents and log-hyperparameters."""
    dW = dK * variance * kw
    dXa, dXb = geometry.sqdist_vjp(X, X, dW)
    return dXa + dXb, float(np.sum(dK * variance * kl)), float(np.sum(dK * K))


def likelihood_terms(geometry, kind, X, Y, lengthscale, variance, noise, jitter):
    """log p(Y | X) and its gradients (latents, log-hyperparameters)."""
    K, W, kw, kl = _kernel_block(geometry, kind, X, lengthscale, variance, jitter)
    C = K + noise * np.eye(len(X))
    val, dC, _ = gaussian_logpdf_shared(C, Y)
    dX, dlog_l, dlog_v = _kernel_backward(geometry, X, dC, W, kw, kl, K, variance)
    dlog_noise = float(np.trace(dC)) * noise
    return val, dX, dlog_l, dlog_v, dlog_noise


def origin_prior_terms(geometry, X, spread):
    """sum_n log N_W(x_n; origin, spread * I) and its gradient."""
    X = np.atleast_2d(X)
    mu = np.broadcast_to(geometry.origin(), X.shape)
    V = geometry.local_steps(mu, X)
    D = geometry.dim
    val = -0.5 * np.sum(V**2) / spread - 0.5 * len(X) * D * np.log(2 * np.pi * spread)
    _, dX = geometry.local_steps_vjp(mu, X, -V / spread)
    val += float(np.sum(geometry.log_volume(mu, X)))
    _, dXv = geometry.log_volume_vjp(mu, X, np.ones(len(X)))
    return val, dX + dXv


def transition_indices(segments):
    """Indices (t, t+1) of every within-trajectory transition."""
    src = np.concatenate([np.arange(a, b - 1) for a, b in segments])
    return src, src + 1


def dynamics_terms(geometry, kind, X, segments, lengthscale, variance, noise_x, spread, jitter,
                   start_prior=True):
    """Hyperbolic (or Euclidean) dynamics prior over all trajectories.

    All within-trajectory transitions share one GP over local steps, since
    the marginalized transition weights are shared. Chains restart at each
    trajectory, whose first point receives the isotropic origin prior.
    Returns (value, dX, dlog_lengthscale, dlog_variance, dlog_noise_x).
    """
    X = np.asarray(X, dtype=float)
    noise_x = np.broadcast_to(np.asarray(noise_x, dtype=float), (geometry.dim,))
    src, dst = transition_indices(segments)
    Xin, Xout = X[src], X[dst]
    U = geometry.local_steps(Xin, Xout)
    K, W, kw, kl = _kernel_block(geometry, kind, Xin, lengthscale, variance, jitter)
    n = len(Xin)
    val = 0.0
    dK = np.zeros_like(K)
    dU = np.zeros_like(U)
    dlog_noise = np.zeros(geometry.dim)
    for d in range(geometry.dim):
        vd, dC, dUd = gaussian_logpdf_shared(K + noise_x[d] * np.eye(n), U[:, d])
        val += vd
        dK += dC
        dU[:, d] = dUd[:, 0]
        dlog_noise[d] = float(np.trace(dC)) * noise_x[d]
    dX = np.zeros_like(X)
    dXk, dlog_l, dlog_v = _kernel_backward(geometry, Xin, dK, W, kw, kl, K, variance)
    np.add.at(dX, src, dXk)
    da, db = geometry.local_steps_vjp(Xin, Xout, dU)
    np.add.at(dX, src, da)
    np.add.at(dX, dst, db)

    val += float(np.sum(geometry.log_volume(Xin, Xout)))
    da, db = geometry.log_volume_vjp(Xin, Xout, np.ones(n))
    np.add.at(dX, src, da)
    np.add.at(dX, dst, db)

    if start_prior:
        starts = np.array([a for a, _ in segments])
        v0, d0 = origin_prior_terms(geometry, X[starts], spread)
        val += v0
        np.add.at(dX, starts, d0)
    return val, dX, dlog_l, dlog_v, dlog_noise


def stress_terms(geometry, X, graph: TaxonomyGraph, idx, labels):
    """Stress over labeled points and its gradient w.r.t. all of X."""
    X = np.asarray(X, dtype=float)
    idx = np.asarray(idx, dtype=int)
    for lab in labels:
        if lab not in graph.index:
            raise ValidationError(f"unknown taxonomy label {lab!r}")
    li = np.array([graph.index[lab] for lab in labels], dtype=int)
    dG = graph.distance_matrix[np.ix_(li, li)].astype(float)
    XL = X[idx]
    W = geometry.sqdist(XL, XL)
    rho = np.sqrt(np.maximum(W, 0.0))
    upper = np.triu(np.ones_like(W, dtype=bool), k=1)
    resid = np.where(upper, dG - rho, 0.0)
    val = float(np.sum(resid**2))
    safe = np.maximum(rho, 1e-12)
    dW = np.where(upper, 1.0 - dG / safe, 0.0)
    da, db = geometry.sqdist_vjp(XL, XL, dW)
    dX = np.zeros_like(X)
    np.add.at(dX, idx, da + db)
    return val, dX


def stress_loss(X, labels, graph: TaxonomyGraph, geometry=None):
    """Sum over labeled pairs i < j of (d_G(c_i, c_j) - d(x_i, x_j))^2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if geometry is None:
        geometry = make_geometry("hyperbolic", X.shape[1] - 1)
    return stress_terms(geometry, X, graph, np.arange(len(X)), labels)[0]


def boost_to_origin(p):
    """Lorentz boost B with B p = origin (an isometry of the hyperboloid)."""
    p = np.asarray(p, dtype=float)
    v = p[1:]
    D = len(v)
    B = np.empty((D + 1, D + 1))
    B[0, 0] = p[0]
    B[0, 1:] = -v
    B[1:, 0] = -v
    B[1:, 1:] = np.eye(D) + np.outer(v, v) / (1.0 + p[0])
    return B


def embed_nodes(graph: TaxonomyGraph, nodes, geometry, rng, restarts=5, iters=2000):
    """Stress-minimizing embedding of taxonomy nodes; best of ``restarts`` runs."""
    nodes = list(nodes)
    n = len(nodes)
    best = (np.inf, None)
    for _ in range(restarts):
        V = rng.normal(scale=0.5, size=(n, geometry.dim))
        X0 = geometry.from_origin_local(V)
        kind = "lorentz" if geometry.curved else "real"
        idx = np.arange(n)

        def loss(values):
            v, dX = stress_terms(geometry, values["X"], graph, idx, nodes)
            return v, {"X": dX}

        res = minimize(
            loss,
            {"X": ParameterBlock(kind, X0, lr=0.05)},
            MinimizeConfig(max_iters=iters, grad_tol=1e-9, patience=200),
        )
        if res.loss < best[0]:
            best = (res.loss, res.values["X"])
    return best[1], best[0]


class LatentModel:
    """One of GPLVM / GPDM / GPHLVM / GPHDM bound to a dataset.

    Use :func:`initialize` to build a model with a fresh latent state, then
    :meth:`train`. Decoding reuses the trained state.
    """

    def __init__(self, dataset: Dataset, graph: TaxonomyGraph, config: ModelConfig, state: LatentState):
        dataset.validate_labels(graph)
        self.dataset = dataset
        self.graph = graph
        self.config = config
        self.geometry = make_geometry(config.geometry, config.latent_dim)
        self.kind = kind_for(self.geometry)
        self.state = state
        self.Y = dataset.Y
        self.segments = dataset.segments
        self.label_idx, self.labels = dataset.endpoint_labels()
        self.trace: list = []
        self._bc_gram = None
        self._decode_cache = None

    # -- latents ---------------------------------------------------------

    @property
    def name(self):
        return self.config.name

    def bc_gram(self):
        if self._bc_gram is None:
            Y = self.Y
            sq = np.sum((Y[:, None, :] - Y[None, :, :]) ** 2, axis=-1)
            ls = self.config.bc_lengthscale
            if ls is None:
                ls = float(np.sqrt(np.median(sq[np.triu_indices(len(Y), 1)])))
            self._bc_gram = np.exp(-0.5 * sq / ls**2)
        return self._bc_gram

    def back_constrain(self, W=None):
        """Latents as a function of the observations, exp_origin(K_bc W^T)."""
        W = self.state.W if W is None else W
        if W is None:
            raise ValidationError("model has no back-constraint weights")
        return self.geometry.from_origin_local(self.bc_gram() @ W.T)

    @property
    def X(self):
        if self.config.back_constraints:
            return self.back_constrain()
        return self.state.X

    # -- objective terms -----------------------------------------------------

    def log_likelihood(self, state=None):
        s = state or self.state
        X = self._latents(s)
        return likelihood_terms(self.geometry, self.kind, X, self.Y, s.ky_lengthscale,
                                s.ky_variance, s.noise_y, self.config.jitter)[0]

    def log_dynamics_prior(self, state=None):
        s = state or self.state
        X = self._latents(s)
        return dynamics_terms(self.geometry, self.kind, X, self.segments, s.kx_lengthscale,
                              s.kx_variance, s.noise_x, self.config.prior_spread,
                              self.config.jitter)[0]

    def log_latent_prior(self, state=None):
        """The prior actually used in training: dynamics or i.i.d. origin prior."""
        s = state or self.state
        if self.config.dynamics:
            return self.log_dynamics_prior(s)
        return origin_prior_terms(self.geometry, self._latents(s), self.config.prior_spread)[0]

    def stress(self, state=None):
        s = state or self.state
        return stress_terms(self.geometry, self._latents(s), self.graph, self.label_idx, self.labels)[0]

    def _latents(self, s):
        if self.config.back_constraints:
            return self.back_constrain(s.W)
        return s.X

    def objective(self, values):
        """Negative log posterior plus weighted stress, with gradients."""
        cfg = self.config
        g = self.geometry
        s = self._state_from_values(values)
        if cfg.back_constraints:
            V = self.bc_gram() @ s.W.T
            X = g.from_origin_local(V)
        else:
            X = s.X
        grads = {}
        ll, dX_ll, dl, dv, dn = likelihood_terms(g, self.kind, X, self.Y, s.ky_lengthscale,
                                                 s.ky_variance, s.noise_y, cfg.jitter)
        loss = -cfg.beta_likelihood * ll
        dX = -cfg.beta_likelihood * dX_ll
        hyper = {
            "ky_lengthscale": -cfg.beta_likelihood * dl,
            "ky_variance": -cfg.beta_likelihood * dv,
            "noise_y": -cfg.beta_likelihood * dn,
        }
        if cfg.dynamics:
            lp, dX_p, dl, dv, dn = dynamics_terms(g, self.kind, X, self.segments, s.kx_lengthscale,
                                                  s.kx_variance, s.noise_x, cfg.prior_spread,
                                                  cfg.jitter)
            hyper["kx_lengthscale"] = -cfg.beta_dynamics * dl
            hyper["kx_variance"] = -cfg.beta_dynamics * dv
            hyper["noise_x"] = -cfg.beta_dynamics * dn
        else:
            lp, dX_p = origin_prior_terms(g, X, cfg.prior_spread)
        loss -= cfg.beta_dynamics * lp
        dX -= cfg.beta_dynamics * dX_p
        if cfg.beta_stress:
            st, dX_s = stress_terms(g, X, self.graph, self.label_idx, self.labels)
            loss += cfg.beta_stress * st
            dX += cfg.beta_stress * dX_s
        if cfg.back_constraints:
            dV = g.from_origin_local_vjp(V, dX)
            grads["W"] = dV.T @ self.bc_gram()
        else:
            grads["X"] = dX
        if cfg.learn_hyperparameters:
            for name, dlog in hyper.items():
                # optimizer expects dL/dvalue for positive blocks
                grads[name] = np.asarray(dlog, dtype=float) / np.asarray(values[name], dtype=float)
        return float(loss), grads

    def _hyper_names(self):
        names = ["ky_lengthscale", "ky_variance", "noise_y"]
        if self.config.dynamics:
            names += ["kx_lengthscale", "kx_variance", "noise_x"]
        return names

    def blocks(self):
        cfg = self.config
        s = self.state
        out = {}
        if cfg.back_constraints:
            out["W"] = ParameterBlock("real", s.W, cfg.lr_latent)
        else:
            out["X"] = ParameterBlock("lorentz" if self.geometry.curved else "real", s.X, cfg.lr_latent)
        if cfg.learn_hyperparameters:
            for name in self._hyper_names():
                out[name] = ParameterBlock("positive", np.atleast_1d(getattr(s, name)), cfg.lr_hyper)
        return out

    def _state_from_values(self, values):
        s = self.state.copy()
        for name, v in values.items():
            if name in ("X", "W"):
                setattr(s, name, np.array(v, dtype=float))
            elif name == "noise_x":
                s.noise_x = np.array(v, dtype=float)
            else:
                setattr(s, name, float(np.asarray(v).reshape(-1)[0]))
        return s

    # -- training --------------------------------------------------------------

    def train(self, config: MinimizeConfig | None = None):
        """Run Riemannian Adam on the composite objective; keeps the best iterate."""
        cfg = self.config
        config = config or MinimizeConfig(cfg.max_iters, cfg.grad_tol, cfg.patience)
        res = minimize(self.objective, self.blocks(), config)
        self.state = self._state_from_values(res.values)
        if self.geometry.curved and not cfg.back_constraints:
            self.state.X = renormalize(self.state.X)
        self.trace = res.trace
        self._decode_cache = None
        log.info("%s trained: %d iterations, loss %.4f (%s)", self.name, res.iterations, res.loss, res.reason)
        return res

    # -- decoding --------------------------------------------------------------

    def _decoder(self):
        if self._decode_cache is None:
            s = self.state
            X = self.X
            K, *_ = _kernel_block(self.geometry, self.kind, X, s.ky_lengthscale, s.ky_variance,
                                  self.config.jitter)
            L, _ = jittered_cholesky(K + s.noise_y * np.eye(len(X)), 0.0)
            alpha = linalg.cho_solve((L, True), self.Y)
            self._decode_cache = (X, L, alpha)
        return self._decode_cache

    def cross_kernel(self, Xs, X=None):
        s = self.state
        X = self.X if X is None else X
        W = self.geometry.sqdist(np.atleast_2d(Xs), X)
        return s.ky_variance * get_profile(self.kind).value(W, s.ky_lengthscale)

    def decode(self, x_star, uncentered=False):
        """GP posterior mean and per-dimension variance at latent points."""
        x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
        s = self.state
        X, L, alpha = self._decoder()
        Ks = self.cross_kernel(x_star, X)
        mean = Ks @ alpha
        v = linalg.solve_triangular(L, Ks.T, lower=True)
        prior = s.ky_variance * (1.0 + self.config.jitter)
        var_f = np.maximum(prior - np.sum(v**2, axis=0), 0.0)
        var = np.repeat((var_f + s.noise_y)[:, None], self.Y.shape[1], axis=1)
        if uncentered and self.dataset.offset is not None:
            mean = mean + self.dataset.offset
        return mean, var

    def training_dynamics(self):
        """Inputs, local-step targets and the factor pieces of the dynamics GP."""
        s = self.state
        X = self.X
        src, dst = transition_indices(self.segments)
        Xin = X[src]
        U = self.geometry.local_steps(Xin, X[dst])
        K, *_ = _kernel_block(self.geometry, self.kind, Xin, s.kx_lengthscale, s.kx_variance,
                              self.config.jitter)
        return Xin, U, K

    def node_latent(self, node):
        """Mean latent of all trajectory endpoints labeled with ``node``."""
        sel = [i for i, lab in zip(self.label_idx, self.labels) if lab == node]
        if not sel:
            raise ValidationError(f"no trajectory endpoint carries label {node!r}")
        P = self.X[sel]
        if not self.geometry.curved:
            return P.mean(axis=0)
        # Lorentzian centroid: normalized ambient mean
        m = P.mean(axis=0)
        return m / np.sqrt(-(np.sum(m[1:] ** 2) - m[0] ** 2))

    # -- persistence -------------------------------------------------------------

    def to_checkpoint(self):
        s = self.state
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "library_version": __version__,
            "model": self.name,
            "seed": self.config.seed,
            "config": asdict(self.config),
            "dataset_digest": self.dataset.digest(),
            "state": {
                "X": np.asarray(s.X).tolist(),
                "ky_lengthscale": s.ky_lengthscale,
                "ky_variance": s.ky_variance,
                "noise_y": s.noise_y,
                "kx_lengthscale": s.kx_lengthscale,
                "kx_variance": s.kx_variance,
                "noise_x": np.asarray(s.noise_x).tolist(),
                "W": None if s.W is None else np.asarray(s.W).tolist(),
            },
            "trace": [float(v) for v in self.trace],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_checkpoint(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_checkpoint(cls, ckpt, dataset: Dataset, graph: TaxonomyGraph):
        if ckpt.get("format") != CHECKPOINT_FORMAT:
            raise ValidationError("not a gphdm checkpoint")
        if ckpt.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {ckpt.get('version')}")
        if ckpt["dataset_digest"] != dataset.digest():
            raise ValidationError("checkpoint was trained on a different dataset")
        st = ckpt["state"]
        state = LatentState(
            X=np.array(st["X"], dtype=float),
            ky_lengthscale=st["ky_lengthscale"],
            ky_variance=st["ky_variance"],
            noise_y=st["noise_y"],
            kx_lengthscale=st["kx_lengthscale"],
            kx_variance=st["kx_variance"],
            noise_x=np.array(st["noise_x"], dtype=float),
            W=None if st["W"] is None else np.array(st["W"], dtype=float),
        )
        model = cls(dataset, graph, ModelConfig(**ckpt["config"]), state)
        model.trace = list(ckpt.get("trace", []))
        return model

    @classmethod
    def load(cls, path, dataset, graph):
        return cls.from_checkpoint(json.loads(Path(path).read_text()), dataset, graph)


def initialize(dataset: Dataset, graph: TaxonomyGraph, config: ModelConfig | None = None) -> LatentModel:
    """Stress-based endpoint layout with geodesic interpolation in between.

    Endpoint nodes are embedded by stress minimization; the root node (or,
    if absent, the first labeled node) is moved to the origin by an
    isometry. Intermediate points sit at equal geodesic fractions.
    """
    config = config or ModelConfig()
    geometry = make_geometry(config.geometry, config.latent_dim)
    dataset.validate_labels(graph)
    rng = np.random.default_rng(config.seed)
    _, labels = dataset.endpoint_labels()
    nodes = sorted(set(labels), key=lambda n: graph.index[n])
    if len(nodes) > 1:
        P, _ = embed_nodes(graph, nodes, geometry, rng, restarts=config.init_restarts)
    else:
        P = geometry.origin()[None, :]
    anchor = graph.root if graph.root in nodes else nodes[0]
    a = nodes.index(anchor)
    if geometry.curved:
        P = renormalize(P @ boost_to_origin(P[a]).T)
    else:
        P = P - P[a]
    pos = {n: P[i] for i, n in enumerate(nodes)}

    X = []
    for traj, s, e in zip(dataset.trajectories, dataset.start_labels, dataset.end_labels):
        ts = np.linspace(0.0, 1.0, len(traj))
        X.append(geometry.geodesic(pos[s], pos[e], ts))
    X = np.concatenate(X, axis=0)

    state = LatentState(
        X=X,
        ky_lengthscale=config.lengthscale,
        ky_variance=config.variance,
        noise_y=config.noise_y,
        kx_lengthscale=config.lengthscale,
        kx_variance=config.variance,
        noise_x=np.full(geometry.dim, config.noise_x),
    )
    model = LatentModel(dataset, graph, config, state)
    if config.back_constraints:
        # ridge fit of the weights to the initial layout's origin coordinates
        mu = np.broadcast_to(geometry.origin(), X.shape)
        V = geometry.local_steps(mu, X)
        Kbc = model.bc_gram()
        state.W = linalg.solve(Kbc + 1e-3 * np.eye(len(Kbc)), V, assume_a="pos").T
        state.X = model.back_constrain()
    return model


def train(model: LatentModel, config: MinimizeConfig | None = None) -> LatentModel:
    model.train(config)
    return model


def grad_check_model(model: LatentModel, rng, n_dirs=2, step=1e-5):
    """Largest relative error between analytic and FD directional derivatives."""
    from .optim import directional_check

    return directional_check(model.objective, model.blocks(), rng, step=step, n_dirs=n_dirs)


__all__ = [
    "ModelConfig",
    "LatentState",
    "LatentModel",
    "initialize",
    "train",
    "stress_loss",
    "gaussian_logpdf_shared",
    "likelihood_terms",
    "dynamics_terms",
    "origin_prior_terms",
    "stress_terms",
    "metric_tensor",
]
