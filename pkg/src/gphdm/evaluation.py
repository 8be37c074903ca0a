"""Stress, mean squared jerk and reconstruction error, plus the model comparison."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, TaxonomyGraph
from .errors import ValidationError
from .model import MODEL_KINDS, LatentModel, ModelConfig, initialize
from .optim import MinimizeConfig

log = logging.getLogger(__name__)


def step_lengths(X, geometry):
    """v_t = d(x_t, x_{t-1}) for t = 2..N."""
    X = np.atleast_2d(X)
    return geometry.distance(X[1:], X[:-1])


def msj(X, geometry):
    """Mean squared jerk (1 / (N - 4)) sum_{t=4}^N (v_t - 2 v_{t-1} + v_{t-2})^2."""
    X = np.atleast_2d(X)
    N = len(X)
    if N < 5:
        raise ValidationError("mean squared jerk needs at least 5 points")
    v = step_lengths(X, geometry)
    jerk = v[2:] - 2 * v[1:-1] + v[:-2]
    return float(np.sum(jerk**2) / (N - 4))


def pair_stress(X, labels, graph: TaxonomyGraph, geometry):
    """Squared stress residuals (d_G - d)^2 for every labeled pair i < j."""
    X = np.atleast_2d(X)
    li = np.array([graph.index[lab] for lab in labels])
    dG = graph.distance_matrix[np.ix_(li, li)]
    d = np.sqrt(geometry.sqdist(X, X))
    iu = np.triu_indices(len(X), 1)
    return (dG[iu] - d[iu]) ** 2


def reconstruction_errors(model: LatentModel):
    """Per-trajectory mean squared error of the decoded training latents."""
    mean, _ = model.decode(model.X)
    sq = (mean - model.Y) ** 2
    return np.array([sq[a:b].mean() for a, b in model.segments])


def reconstruction_mse(model: LatentModel, dataset: Dataset | None = None):
    if dataset is not None and dataset.digest() != model.dataset.digest():
        raise ValidationError("dataset does not match the model's training data")
    mean, _ = model.decode(model.X)
    return float(np.mean((mean - model.Y) ** 2))


@dataclass
class MetricRow:
    model: str
    geometry: str
    latent_dim: int
    stress_mean: float
    stress_std: float
    msj_mean: float
    msj_std: float
    mse_mean: float
    mse_std: float
    runtime: float
    seed: int

    @property
    def label(self):
        space = "H" if self.geometry == "hyperbolic" else "R"
        return f"{self.model.upper()} {space}^{self.latent_dim}"


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)
    config_digest: str = ""
    dataset_digest: str = ""
    version: str = __version__

    COLUMNS = ("model", "geometry", "latent_dim", "seed", "stress_mean", "stress_std",
               "msj_mean", "msj_std", "mse_mean", "mse_std", "runtime")

    def find(self, model, latent_dim=2, seed=None):
        for r in self.rows:
            if r.model == model and r.latent_dim == latent_dim and (seed is None or r.seed == seed):
                return r
        raise KeyError((model, latent_dim, seed))

    def to_text(self):
        head = f"{'model':<14}{'stress':>20}{'MSJ x100':>22}{'MSE x100':>22}{'time [s]':>10}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.label:<14}"
                f"{r.stress_mean:>11.3f} ± {r.stress_std:<6.3f}"
                f"{r.msj_mean:>13.4f} ± {r.msj_std:<6.4f}"
                f"{r.mse_mean:>13.4f} ± {r.mse_std:<6.4f}"
                f"{r.runtime:>10.1f}"
            )
        lines.append(f"config {self.config_digest}  dataset {self.dataset_digest}  gphdm {self.version}")
        return "\n".join(lines)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS + ("config_digest", "version"))
        for r in self.rows:
            d = asdict(r)
            w.writerow([d[c] for c in self.COLUMNS] + [self.config_digest, self.version])
        return buf.getvalue()

    def to_dict(self):
        return {
            "version": self.version,
            "config_digest": self.config_digest,
            "dataset_digest": self.dataset_digest,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def evaluate_model(model: LatentModel, runtime=0.0) -> MetricRow:
    g = model.geometry
    X = model.X
    idx, labels = model.label_idx, model.labels
    stress = pair_stress(X[idx], labels, model.graph, g)
    jerks = np.array([msj(X[a:b], g) for a, b in model.segments])
    mse = reconstruction_errors(model)
    return MetricRow(
        model=model.name,
        geometry=model.config.geometry,
        latent_dim=model.config.latent_dim,
        stress_mean=float(stress.mean()),
        stress_std=float(stress.std()),
        msj_mean=100 * float(jerks.mean()),
        msj_std=100 * float(jerks.std()),
        mse_mean=100 * float(mse.mean()),
        mse_std=100 * float(mse.std()),
        runtime=float(runtime),
        seed=model.config.seed,
    )


def config_digest(configs):
    blob = json.dumps([asdict(c) for c in configs], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_latents_csv(path, model: LatentModel):
    X = model.X
    P = model.geometry.to_plot(X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trajectory", "t"] + [f"x{i}" for i in range(X.shape[1])]
                   + [f"p{i}" for i in range(P.shape[1])] + ["label"])
        labels = dict(zip(model.label_idx.tolist(), model.labels))
        for k, (a, b) in enumerate(model.segments):
            for t in range(a, b):
                w.writerow([k, t - a] + [repr(float(v)) for v in X[t]]
                           + [repr(float(v)) for v in P[t]] + [labels.get(t, "")])


def run_comparison(dataset: Dataset, graph: TaxonomyGraph, models=tuple(MODEL_KINDS),
                   latent_dims=(2, 3), seed=0, out_dir=None, minimize_config=None,
                   **overrides) -> MetricReport:
    """Train every model variant with a shared seed and tabulate the metrics."""
    configs = [
        ModelConfig.for_model(name, latent_dim=dim, seed=seed, **overrides)
        for dim in latent_dims for name in models
    ]
    report = MetricReport(config_digest=config_digest(configs), dataset_digest=dataset.digest())
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for cfg in configs:
        t0 = time.perf_counter()
        model = initialize(dataset, graph, cfg)
        model.train(minimize_config)
        row = evaluate_model(model, time.perf_counter() - t0)
        log.info("%s: stress %.3f msj %.4f mse %.4f", row.label, row.stress_mean, row.msj_mean, row.mse_mean)
        report.rows.append(row)
        if out_dir is not None:
            write_latents_csv(Path(out_dir) / f"latents_{cfg.name}_{cfg.latent_dim}d.csv", model)
    return report
