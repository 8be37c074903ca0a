"""Command-line interface: synth, train, generate, eval, export.

Exit codes: 0 success, 1 validation error, 2 numerical failure. Failures
print one line ``gphdm: error=<kind> reason=<text>`` on standard error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import TaxonomyGraph, augment_reverse, read_dataset, synthesize, write_dataset
from .errors import DivergenceError, QuadratureError, ValidationError
from .evaluation import MetricReport, evaluate_model, run_comparison, write_latents_csv
from .generate import (
    conditional_optimize,
    hyperbolic_geodesic,
    mean_predict,
    pullback_geodesic,
)
from .model import MODEL_KINDS, LatentModel, ModelConfig, initialize
from .optim import MinimizeConfig

log = logging.getLogger("gphdm")

NUMERICAL = (np.linalg.LinAlgError, FloatingPointError, ArithmeticError, QuadratureError, DivergenceError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, payload: dict, text: str | None = None):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif text:
        print(text)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _load_model(args):
    dataset, graph = read_dataset(args.data)
    if not args.checkpoint:
        raise ValidationError("--checkpoint is required")
    return LatentModel.load(args.checkpoint, dataset, graph)


def _resolve_model_name(args):
    if args.model is None:
        dyn = True
        for name, (geom, d) in MODEL_KINDS.items():
            if geom == args.geometry and d == dyn:
                return name
    geom, _ = MODEL_KINDS[args.model]
    if args.geometry_given and geom != args.geometry:
        raise ValidationError(f"--model {args.model} conflicts with --geometry {args.geometry}")
    return args.model


# --- commands ----------------------------------------------------------------------


def cmd_synth(args):
    graph = TaxonomyGraph.binary_tree(args.depth)
    ds = synthesize(graph, trajectories_per_leaf=args.per_leaf, points=args.points,
                    output_dim=args.output_dim, noise=args.noise, seed=args.seed)
    if args.reverse:
        ds = augment_reverse(ds)
    out = _out(args)
    settings = {k: getattr(args, k) for k in ("depth", "per_leaf", "points", "output_dim", "noise", "reverse", "seed")}
    write_dataset(out, ds, graph, {"config": settings, "config_digest": _digest(settings), "version": __version__})
    payload = {"command": "synth", "dataset": str(out), "digest": ds.digest(), "trajectories": len(ds.trajectories),
               "points": ds.n_points, "version": __version__}
    _emit(args, payload, f"wrote {len(ds.trajectories)} trajectories ({ds.n_points} points) to {out}  digest {ds.digest()}")
    return 0


def cmd_train(args):
    dataset, graph = read_dataset(args.data)
    name = _resolve_model_name(args)
    cfg = ModelConfig.for_model(name, latent_dim=args.latent_dim, seed=args.seed,
                                back_constraints=args.back_constraints, max_iters=args.iters)
    model = initialize(dataset, graph, cfg)
    res = model.train(MinimizeConfig(max_iters=args.iters, grad_tol=cfg.grad_tol, patience=cfg.patience))
    out = _out(args)
    ckpt = model.to_checkpoint()
    ckpt["config_digest"] = _digest(ckpt["config"])
    _write_json(out / "checkpoint.json", ckpt)
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "loss", "best"])
        for i, (v, b) in enumerate(zip(res.trace, res.best_trace)):
            w.writerow([i, repr(v), repr(b)])
    payload = {"command": "train", "model": name, "loss": res.loss, "iterations": res.iterations,
               "reason": res.reason, "checkpoint": str(out / "checkpoint.json"),
               "config_digest": ckpt["config_digest"], "version": __version__}
    _emit(args, payload, f"{name}: loss {res.loss:.4f} after {res.iterations} iterations ({res.reason}); "
                         f"checkpoint {out / 'checkpoint.json'}")
    return 0


def _endpoint(model, spec):
    """A taxonomy node name or comma-separated ambient coordinates."""
    if spec is None:
        raise ValidationError("--from and --to are required for this method")
    if spec in model.graph.index:
        return model.node_latent(spec)
    try:
        x = np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise ValidationError(f"endpoint {spec!r} is neither a node nor coordinates") from None
    A = model.X.shape[1]
    if x.shape != (A,):
        raise ValidationError(f"endpoint needs {A} coordinates")
    if model.geometry.curved:
        from .manifold import check_point

        check_point(x, tol=1e-6)
    return x


def cmd_generate(args):
    model = _load_model(args)
    M = args.points
    if args.method == "mean":
        x0 = _endpoint(model, args.start)
        path = mean_predict(model, x0, M - 1)
    elif args.method == "conditional":
        xa, xb = _endpoint(model, args.start), _endpoint(model, args.to)
        path = conditional_optimize(model, [(0, xa), (M - 1, xb)], M, use_likelihood=not args.prior_only)
    elif args.method == "geodesic":
        xa, xb = _endpoint(model, args.start), _endpoint(model, args.to)
        path = hyperbolic_geodesic(xa, xb, M, model=model)
    else:
        xa, xb = _endpoint(model, args.start), _endpoint(model, args.to)
        path = pullback_geodesic(model, xa, xb, M, lam=args.lam)
    out = _out(args)
    stem = f"path_{args.method}"
    path.write_csv(out / f"{stem}.csv")
    d = path.to_dict()
    d["config_digest"] = _digest({"checkpoint": Path(args.checkpoint).read_text(), "method": args.method,
                                  "from": args.start, "to": args.to, "points": M, "lam": args.lam})
    _write_json(out / f"{stem}.json", d)
    payload = {"command": "generate", "method": args.method, "points": path.n_points,
               "mean_variance": path.mean_variance, "csv": str(out / f"{stem}.csv"),
               "config_digest": d["config_digest"], "version": __version__}
    _emit(args, payload, f"{args.method}: {path.n_points} points, mean variance {path.mean_variance:.6g} -> {out / stem}.csv")
    return 0


def cmd_eval(args):
    out = _out(args)
    if args.compare:
        dataset, graph = read_dataset(args.data)
        dims = tuple(args.dims) if args.dims else (args.latent_dim,)
        report = run_comparison(dataset, graph, latent_dims=dims, seed=args.seed, out_dir=out,
                                minimize_config=MinimizeConfig(max_iters=args.iters))
    else:
        if not args.checkpoint:
            raise ValidationError("eval needs --checkpoint or --compare")
        dataset, graph = read_dataset(args.data)
        rows, cfgs = [], []
        for ck in args.checkpoint_list:
            m = LatentModel.load(ck, dataset, graph)
            rows.append(evaluate_model(m))
            cfgs.append(m.to_checkpoint()["config"])
        report = MetricReport(rows, _digest(cfgs), dataset.digest())
    for r in report.rows:
        log.info("%s runtime %.1fs", r.label, r.runtime)
        r.runtime = 0.0  # keep report files reproducible; timings go to the log
    (out / "report.txt").write_text(report.to_text() + "\n")
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(report.to_json() + "\n")
    _emit(args, report.to_dict(), report.to_text())
    return 0


def svg_poincare(latent_sets, path_sets=(), size=480, labels=None):
    """Minimal SVG: unit disk, one polyline + dots per trajectory, overlays for paths."""
    c = size / 2
    r = size / 2 - 10
    palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             f'<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="black" stroke-width="1"/>']

    def pts(P):
        return " ".join(f"{c + r * p[0]:.2f},{c - r * p[1]:.2f}" for p in P)

    keys = sorted(set(labels)) if labels else []
    for k, P in enumerate(latent_sets):
        col = palette[keys.index(labels[k]) % len(palette)] if labels else palette[k % len(palette)]
        parts.append(f'<polyline points="{pts(P)}" fill="none" stroke="{col}" stroke-width="0.8" stroke-opacity="0.6"/>')
        for p in P:
            parts.append(f'<circle cx="{c + r * p[0]:.2f}" cy="{c - r * p[1]:.2f}" r="1.6" fill="{col}"/>')
    for P in path_sets:
        parts.append(f'<polyline points="{pts(P)}" fill="none" stroke="black" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_export(args):
    model = _load_model(args)
    out = _out(args)
    write_latents_csv(out / "latents.csv", model)
    written = [str(out / "latents.csv")]
    if args.svg:
        X = model.X
        P = model.geometry.to_plot(X)
        if P.shape[1] != 2:
            P = P[:, :2]  # first two Poincare coordinates for D = 3
        sets = [P[a:b] for a, b in model.segments]
        overlays = []
        for extra in args.path or []:
            lat = np.array(json.loads(Path(extra).read_text())["latents"])
            Q = model.geometry.to_plot(lat)[:, :2]
            overlays.append(Q)
        if not model.geometry.curved:
            scale = 1.05 * max(np.max(np.abs(P)), max((np.max(np.abs(q)) for q in overlays), default=0))
            sets = [s / scale for s in sets]
            overlays = [q / scale for q in overlays]
        (out / "latents.svg").write_text(svg_poincare(sets, overlays, labels=list(model.dataset.end_labels)))
        written.append(str(out / "latents.svg"))
    meta = {"command": "export", "files": written, "config_digest": _digest(model.to_checkpoint()["config"]),
            "dataset_digest": model.dataset.digest(), "version": __version__}
    _write_json(out / "export.json", meta)
    _emit(args, meta, "wrote " + ", ".join(written))
    return 0


# --- parser --------------------------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="gphdm-out")
    common.add_argument("--geometry", choices=["hyperbolic", "euclidean"], default=None)
    common.add_argument("--latent-dim", type=int, choices=[2, 3], default=2)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gphdm", description="Hyperbolic GP dynamical models for taxonomy-structured motion.")
    p.add_argument("--version", action="version", version=f"gphdm {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic taxonomy dataset")
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--per-leaf", type=int, default=2)
    s.add_argument("--points", type=int, default=30)
    s.add_argument("--output-dim", type=int, default=8)
    s.add_argument("--noise", type=float, default=0.02)
    s.add_argument("--reverse", action="store_true", help="append time-reversed motions")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=list(MODEL_KINDS))
    t.add_argument("--iters", type=int, default=1000)
    t.add_argument("--back-constraints", action="store_true")
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", parents=[common], help="generate a latent path and decode it")
    g.add_argument("--data", required=True)
    g.add_argument("--checkpoint", required=True)
    g.add_argument("--method", choices=["mean", "conditional", "geodesic", "pullback"], required=True)
    g.add_argument("--from", dest="start")
    g.add_argument("--to")
    g.add_argument("--points", type=int, default=20)
    g.add_argument("--lam", type=float, default=1.0)
    g.add_argument("--prior-only", action="store_true", help="drop the decoder term in conditional mode")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", parents=[common], help="metric report for checkpoints or a full comparison")
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint", action="append", dest="checkpoint_list")
    e.add_argument("--compare", action="store_true", help="train and compare all four models")
    e.add_argument("--dims", type=int, nargs="+", choices=[2, 3])
    e.add_argument("--iters", type=int, default=1000)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export", parents=[common], help="Poincare latent CSV and optional SVG")
    x.add_argument("--data", required=True)
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--svg", action="store_true")
    x.add_argument("--path", action="append", help="GeneratedPath JSON to overlay")
    x.set_defaults(func=cmd_export)
    return p


def _validate(args):
    args.geometry_given = args.geometry is not None
    if args.geometry is None:
        args.geometry = "hyperbolic"
    if getattr(args, "command", None) == "eval":
        args.checkpoint = bool(args.checkpoint_list)
    for name in ("points", "iters", "per_leaf", "depth", "output_dim"):
        v = getattr(args, name, None)
        if v is not None and v < (2 if name == "points" else 1):
            raise ValidationError(f"--{name.replace('_', '-')} is too small")
    if getattr(args, "noise", 0.0) < 0:
        raise ValidationError("--noise must be non-negative")
    if getattr(args, "lam", 0.0) < 0:
        raise ValidationError("--lam must be non-negative")


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except ValidationError as exc:
        print(f"gphdm: error=validation reason={_one_line(exc)}", file=sys.stderr)
        return 1
    except (FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"gphdm: error=validation reason={_one_line(exc)}", file=sys.stderr)
        return 1
    except NUMERICAL as exc:
        print(f"gphdm: error=numerical reason={_one_line(exc)}", file=sys.stderr)
        return 2


def _one_line(exc):
    return " ".join(str(exc).split()) or type(exc).__name__


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
