"""Riemannian Adam over products of Lorentz and Euclidean parameter blocks.

A loss callable receives ``{name: value}`` and returns ``(loss, {name: grad})``
where each gradient holds the ambient Euclidean partials with respect to
the block *values*. Lorentz blocks are converted to Riemannian gradients
here, positive blocks are optimized in log space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .errors import DivergenceError, ValidationError

log = logging.getLogger(__name__)

KINDS = ("lorentz", "real", "positive")


@dataclass
class ParameterBlock:
    kind: str
    value: np.ndarray
    lr: float = 1e-2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown block kind {self.kind!r}")
        self.value = np.array(self.value, dtype=float)
        if self.kind == "positive" and np.any(self.value <= 0):
            raise ValidationError("positive block holds non-positive values")
        if self.kind == "lorentz":
            self.value = manifold.renormalize(np.atleast_2d(self.value))

    def copy(self):
        return ParameterBlock(self.kind, self.value.copy(), self.lr)


@dataclass
class AdamState:
    step: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    first: dict = field(default_factory=dict)
    second: dict = field(default_factory=dict)


@dataclass
class MinimizeConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-6
    patience: int = 200
    min_improvement: float = 1e-10


@dataclass
class MinimizeResult:
    values: dict
    loss: float
    trace: list
    best_trace: list
    iterations: int
    converged: bool
    reason: str
    grad_norm: float


def egrad_to_rgrad(x, egrad):
    """Riemannian gradient proj_x(G egrad) on the Lorentz model."""
    x = np.asarray(x, dtype=float)
    G = manifold.metric_tensor(x.shape[-1] - 1)
    return manifold.project_to_tangent(x, np.asarray(egrad, dtype=float) @ G)


def riemannian_gradient(loss, x, egrad=None, step: float = 1e-6):
    """Riemannian gradient of a scalar function of a Lorentz point.

    Without ``egrad`` the ambient partials are taken by central differences
    of ``loss`` in ambient coordinates.
    """
    x = np.asarray(x, dtype=float)
    f0 = loss(x)
    if not np.isfinite(f0):
        raise ValidationError("loss is not finite at x")
    if egrad is None:
        egrad = np.zeros_like(x)
        for i in range(x.shape[-1]):
            e = np.zeros_like(x)
            e[i] = step
            egrad[i] = (loss(x + e) - loss(x - e)) / (2 * step)
    return egrad_to_rgrad(x, egrad)


def _block_rgrad(block, grad):
    if block.kind == "lorentz":
        return egrad_to_rgrad(block.value, grad)
    if block.kind == "positive":
        return grad * block.value
    return np.asarray(grad, dtype=float)


def _grad_sq_norm(block, rgrad):
    if block.kind == "lorentz":
        return float(np.sum(manifold.lorentz_inner(rgrad, rgrad)))
    return float(np.sum(rgrad**2))


def adam_step(state: AdamState, blocks: dict, grads: dict):
    """One Riemannian Adam update, in place. ``grads`` are Riemannian/log-space."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in block {name!r}")
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, block in blocks.items():
        g = grads[name]
        if block.kind == "lorentz":
            x = block.value
            g_loc = manifold.to_local(x, g)
            m = state.first.get(name, np.zeros_like(g_loc))
            v = state.second.get(name, np.zeros(g_loc.shape[:-1]))
            m = b1 * m + (1 - b1) * g_loc
            v = b2 * v + (1 - b2) * np.sum(g_loc**2, axis=-1)
            step = -block.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)[..., None]
            x_new = manifold.exp_local(x, step)
            state.first[name] = manifold.to_local(
                x_new, manifold.parallel_transport(x, x_new, manifold.to_ambient(x, m))
            )
            state.second[name] = v
            block.value = x_new
        else:
            m = state.first.get(name, np.zeros_like(g))
            v = state.second.get(name, np.zeros_like(g))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g**2
            step = -block.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
            if block.kind == "positive":
                block.value = block.value * np.exp(step)
            else:
                block.value = block.value + step
            state.first[name] = m
            state.second[name] = v
    return blocks


def minimize(loss_fn, blocks: dict, config: MinimizeConfig | None = None, callback=None):
    """Run Riemannian Adam and return the best iterate seen.

    Stops when the gradient norm drops below ``grad_tol``, when the loss has
    not improved by ``min_improvement`` for ``patience`` iterations, or after
    ``max_iters`` updates.
    """
    config = config or MinimizeConfig()
    blocks = {k: b.copy() for k, b in blocks.items()}
    state = AdamState()
    best = np.inf
    best_values = None
    stall = 0
    trace, best_trace = [], []
    reason = "max_iters"
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(config.max_iters + 1):
        values = {k: b.value for k, b in blocks.items()}
        loss, egrads = loss_fn(values)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss became non-finite at iteration {it}")
        trace.append(float(loss))
        # patience counts only significant gains; the snapshot takes any gain
        if loss < best - config.min_improvement:
            stall = 0
        else:
            stall += 1
        if loss < best:
            best = float(loss)
            best_values = {k: v.copy() for k, v in values.items()}
        best_trace.append(best)
        rgrads = {k: _block_rgrad(blocks[k], egrads[k]) for k in blocks}
        gnorm = np.sqrt(sum(_grad_sq_norm(blocks[k], rgrads[k]) for k in blocks))
        if callback is not None:
            callback(it, loss, values)
        if gnorm < config.grad_tol:
            reason, converged = "grad_tol", True
            break
        if stall >= config.patience:
            reason, converged = "patience", True
            break
        if it == config.max_iters:
            break
        adam_step(state, blocks, rgrads)
    log.debug("minimize stopped after %d iterations (%s), loss %.6g", it, reason, best)
    return MinimizeResult(best_values, best, trace, best_trace, it, converged, reason, float(gnorm))


def random_direction(block_kind, value, rng):
    d = rng.standard_normal(np.shape(value))
    if block_kind == "lorentz":
        d = manifold.project_to_tangent(value, d)
    return d


def _move(kind, value, direction, t):
    if kind == "lorentz":
        return manifold.expmap(value, t * direction)
    if kind == "positive":
        return value * np.exp(t * direction)
    return value + t * direction


def directional_check(loss_fn, blocks: dict, rng, step: float = 1e-5, n_dirs: int = 2):
    """Compare analytic and central-difference directional derivatives.

    Returns the largest relative error over ``n_dirs`` random directions in
    the product of all blocks. Falls back to Richardson extrapolation when
    the plain central difference disagrees.
    """
    values = {k: b.value for k, b in blocks.items()}
    _, egrads = loss_fn(values)
    rgrads = {k: _block_rgrad(blocks[k], egrads[k]) for k in blocks}
    worst = 0.0
    for _ in range(n_dirs):
        dirs = {k: random_direction(b.kind, b.value, rng) for k, b in blocks.items()}
        analytic = 0.0
        for k, b in blocks.items():
            if b.kind == "lorentz":
                analytic += float(np.sum(manifold.lorentz_inner(rgrads[k], dirs[k])))
            else:
                analytic += float(np.sum(rgrads[k] * dirs[k]))

        def fd(h):
            plus = {k: _move(b.kind, b.value, dirs[k], h) for k, b in blocks.items()}
            minus = {k: _move(b.kind, b.value, dirs[k], -h) for k, b in blocks.items()}
            return (loss_fn(plus)[0] - loss_fn(minus)[0]) / (2 * h)

        numeric = fd(step)
        err = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-12)
        if err > 1e-4:
            numeric = (4 * fd(step / 2) - numeric) / 3
            err = min(err, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-12))
        worst = max(worst, err)
    return worst
