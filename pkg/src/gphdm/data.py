"""Taxonomy graphs, trajectory datasets, preprocessing and synthetic data.

On disk a dataset directory holds::

    taxonomy.json                 {"nodes": [...], "edges": [[a, b], ...], "root": "..."}
    trajectories/traj_000.csv     header "t,q1,...,qDy", one row per sample
    trajectories/traj_000.json    sidecar: labels, sample rate, trim indices

Gzip-compressed variants (``.csv.gz``, ``.json.gz``) are read transparently.
"""

from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import ValidationError


class TaxonomyGraph:
    """Undirected unit-weight graph with cached hop distances."""

    def __init__(self, nodes, edges, root=None):
        self.nodes = [str(n) for n in nodes]
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError("duplicate taxonomy node names")
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.edges = []
        for a, b in edges:
            if a not in self.index or b not in self.index:
                raise ValidationError(f"edge ({a}, {b}) references an unknown node")
            self.edges.append((str(a), str(b)))
        self.root = root if root is not None else self.nodes[0]
        if self.root not in self.index:
            raise ValidationError(f"unknown root {self.root!r}")
        n = len(self.nodes)
        rows = [self.index[a] for a, b in self.edges] + [self.index[b] for a, b in self.edges]
        cols = [self.index[b] for a, b in self.edges] + [self.index[a] for a, b in self.edges]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        if n > 1 and connected_components(adj, directed=False)[0] != 1:
            raise ValidationError("taxonomy graph must be connected")
        D = shortest_path(adj, directed=False, unweighted=True)
        self._dist = D.astype(int)
        self._dist.setflags(write=False)
        self._adj = adj

    def __repr__(self):
        return f"TaxonomyGraph({len(self.nodes)} nodes, root={self.root!r})"

    @property
    def distance_matrix(self):
        return self._dist

    def distance(self, a, b) -> int:
        try:
            return int(self._dist[self.index[a], self.index[b]])
        except KeyError as exc:
            raise ValidationError(f"unknown taxonomy node {exc.args[0]!r}") from None

    def neighbors(self, node):
        i = self.index[node]
        return [self.nodes[j] for j in self._adj[i].indices]

    def depth(self, node):
        return self.distance(self.root, node)

    def children(self, node):
        d = self.depth(node)
        return [c for c in self.neighbors(node) if self.depth(c) == d + 1]

    def leaves(self):
        return [n for n in self.nodes if n != self.root and not self.children(n)]

    def to_dict(self):
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges], "root": self.root}

    @classmethod
    def from_dict(cls, d):
        return cls(d["nodes"], d["edges"], d.get("root"))

    @classmethod
    def binary_tree(cls, depth: int = 3):
        """Complete binary tree with ``depth`` levels (depth 3 has 4 leaves)."""
        nodes, edges = ["root"], []
        frontier = ["root"]
        for level in range(1, depth):
            nxt = []
            for parent in frontier:
                for side in "ab":
                    child = f"{parent}{side}" if parent != "root" else side
                    nodes.append(child)
                    edges.append((parent, child))
                    nxt.append(child)
            frontier = nxt
        return cls(nodes, edges, "root")


def graph_distance(graph: TaxonomyGraph, a, b) -> int:
    return graph.distance(a, b)


@dataclass
class Dataset:
    """A set of trajectories with taxonomy labels on their endpoints."""

    trajectories: list
    start_labels: list
    end_labels: list
    metadata: list = field(default_factory=list)
    offset: np.ndarray | None = None

    def __post_init__(self):
        self.trajectories = [np.atleast_2d(np.asarray(t, dtype=float)) for t in self.trajectories]
        if not self.trajectories:
            raise ValidationError("dataset has no trajectories")
        if len(self.start_labels) != len(self.trajectories) or len(self.end_labels) != len(self.trajectories):
            raise ValidationError("one start and one end label per trajectory")
        dims = {t.shape[1] for t in self.trajectories}
        if len(dims) != 1:
            raise ValidationError("trajectories disagree on output dimension")
        for t in self.trajectories:
            if len(t) < 3:
                raise ValidationError("trajectories need at least 3 points")
            if not np.all(np.isfinite(t)):
                raise ValidationError("trajectory contains non-finite values")
        if not self.metadata:
            self.metadata = [{} for _ in self.trajectories]

    @property
    def Y(self):
        return np.concatenate(self.trajectories, axis=0)

    @property
    def n_points(self):
        return sum(len(t) for t in self.trajectories)

    @property
    def output_dim(self):
        return self.trajectories[0].shape[1]

    @property
    def segments(self):
        """(start, stop) index ranges of each trajectory in the stacked array."""
        out, start = [], 0
        for t in self.trajectories:
            out.append((start, start + len(t)))
            start += len(t)
        return out

    def endpoint_labels(self):
        """Stacked indices of labeled points and their taxonomy nodes."""
        idx, labels = [], []
        for (a, b), s, e in zip(self.segments, self.start_labels, self.end_labels):
            idx += [a, b - 1]
            labels += [s, e]
        return np.array(idx), labels

    def validate_labels(self, graph: TaxonomyGraph):
        for lab in list(self.start_labels) + list(self.end_labels):
            if lab not in graph.index:
                raise ValidationError(f"label {lab!r} is not a taxonomy node")

    def centered(self):
        mean = self.Y.mean(axis=0)
        base = self.offset if self.offset is not None else 0.0
        return Dataset(
            [t - mean for t in self.trajectories],
            list(self.start_labels),
            list(self.end_labels),
            [dict(m) for m in self.metadata],
            base + mean,
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for t, s, e in zip(self.trajectories, self.start_labels, self.end_labels):
            h.update(np.ascontiguousarray(t, dtype="<f8").tobytes())
            h.update(f"{s}->{e};".encode())
        return h.hexdigest()[:16]


def augment_reverse(dataset: Dataset) -> Dataset:
    """Append every trajectory reversed in time with swapped endpoint labels."""
    rev = [t[::-1].copy() for t in dataset.trajectories]
    meta = [dict(m, reversed=not m.get("reversed", False)) for m in dataset.metadata]
    return Dataset(
        dataset.trajectories + rev,
        list(dataset.start_labels) + list(dataset.end_labels),
        list(dataset.end_labels) + list(dataset.start_labels),
        [dict(m) for m in dataset.metadata] + meta,
        dataset.offset,
    )


def leaf_postures(graph: TaxonomyGraph, output_dim: int, rng, scale=1.0, decay=0.5):
    """Assign each node a posture; children offset from their parent.

    Offsets of all non-root nodes use mutually orthogonal directions when the
    output dimension allows it, so siblings end up closer than cousins.
    """
    others = [n for n in graph.nodes if n != graph.root]
    if len(others) <= output_dim:
        q, _ = np.linalg.qr(rng.standard_normal((output_dim, output_dim)))
        dirs = {n: q[:, i] for i, n in enumerate(others)}
    else:
        raw = rng.standard_normal((len(others), output_dim))
        dirs = {n: r / np.linalg.norm(r) for n, r in zip(others, raw)}
    postures = {graph.root: 0.2 * rng.standard_normal(output_dim)}
    order = sorted(others, key=graph.depth)
    for n in order:
        parent = next(p for p in graph.neighbors(n) if graph.depth(p) == graph.depth(n) - 1)
        postures[n] = postures[parent] + scale * decay ** (graph.depth(n) - 1) * dirs[n]
    return postures


def synthesize(
    graph: TaxonomyGraph,
    trajectories_per_leaf: int = 2,
    points: int = 30,
    output_dim: int = 8,
    noise: float = 0.02,
    seed: int = 0,
    center: bool = True,
):
    """Smooth rest-to-leaf motions with a cubic time profile plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    postures = leaf_postures(graph, output_dim, rng)
    rest = postures[graph.root]
    tau = np.linspace(0.0, 1.0, points)
    profile = 3 * tau**2 - 2 * tau**3
    trajs, starts, ends, meta = [], [], [], []
    for leaf in graph.leaves():
        for k in range(trajectories_per_leaf):
            y = rest + profile[:, None] * (postures[leaf] - rest)
            if noise > 0:
                y = y + noise * rng.standard_normal(y.shape)
            trajs.append(y)
            starts.append(graph.root)
            ends.append(leaf)
            meta.append({"subject": "synthetic", "grasp": leaf, "repetition": k, "sample_rate": 30.0})
    ds = Dataset(trajs, starts, ends, meta)
    return ds.centered() if center else ds


@dataclass
class RawTrajectory:
    values: np.ndarray
    sample_rate: float
    metadata: dict

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.isnan(self.values).any():
            raise ValidationError("raw trajectory contains NaNs")
        if len(self.values) < 10:
            raise ValidationError("raw trajectories need at least 10 samples")


@dataclass
class PreprocessConfig:
    cutoff_hz: float = 5.0
    stride: int | None = None
    target_points: int = 35
    order: int = 2


def lowpass(values, sample_rate, cutoff_hz, order=2):
    """Zero-phase Butterworth low-pass (forward and backward pass)."""
    b, a = signal.butter(order, cutoff_hz, btype="low", fs=sample_rate)
    return signal.filtfilt(b, a, values, axis=0)


def preprocess(raw_files, config: PreprocessConfig | None = None) -> Dataset:
    """Filter, trim, subsample and center a list of :class:`RawTrajectory`.

    Files whose metadata marks them as already preprocessed skip the first
    three steps, which makes the pipeline idempotent up to re-centering.
    """
    config = config or PreprocessConfig()
    trajs, starts, ends, meta = [], [], [], []
    for raw in raw_files:
        md = dict(raw.metadata)
        y = raw.values
        if not md.get("preprocessed", False):
            y = lowpass(y, raw.sample_rate, config.cutoff_hz, config.order)
            lo, hi = md.get("trim", [0, len(y) - 1])
            y = y[int(lo) : int(hi) + 1]
            stride = config.stride or max(1, int(round(len(y) / config.target_points)))
            y = y[::stride]
            md["preprocessed"] = True
            md["sample_rate"] = raw.sample_rate / stride
        if len(y) < 5:
            raise ValidationError("trajectory shorter than 5 samples after subsampling")
        trajs.append(y)
        starts.append(md.get("start_label"))
        ends.append(md.get("end_label", md.get("grasp")))
        meta.append(md)
    return Dataset(trajs, starts, ends, meta).centered()


# --- file formats -----------------------------------------------------------


def _open_text(path, mode="r"):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode + "b"), encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def _find(path: Path):
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise FileNotFoundError(path)


def read_json(path):
    with _open_text(_find(Path(path))) as fh:
        return json.load(fh)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trajectory_csv(path, values, sample_rate=1.0):
    values = np.atleast_2d(values)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"q{i + 1}" for i in range(values.shape[1])])
        for i, row in enumerate(values):
            w.writerow([repr(i / sample_rate)] + [repr(float(v)) for v in row])


def read_trajectory_csv(path):
    with _open_text(_find(Path(path))) as fh:
        rows = list(csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or any(h != f"q{i + 1}" for i, h in enumerate(header[1:])):
        raise ValidationError(f"{path}: header must be 't,q1..qD'")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return data[:, 0], data[:, 1:]


def read_taxonomy(path) -> TaxonomyGraph:
    return TaxonomyGraph.from_dict(read_json(path))


def read_raw_trajectory(csv_path) -> RawTrajectory:
    csv_path = Path(csv_path)
    _, values = read_trajectory_csv(csv_path)
    stem = csv_path.name.split(".")[0]
    meta = read_json(csv_path.with_name(stem + ".json"))
    return RawTrajectory(values, float(meta.get("sample_rate", 100.0)), meta)


def write_dataset(directory, dataset: Dataset, graph: TaxonomyGraph, extra: dict | None = None):
    directory = Path(directory)
    (directory / "trajectories").mkdir(parents=True, exist_ok=True)
    write_json(directory / "taxonomy.json", graph.to_dict())
    for i, (t, s, e, m) in enumerate(
        zip(dataset.trajectories, dataset.start_labels, dataset.end_labels, dataset.metadata)
    ):
        rate = float(m.get("sample_rate", 1.0))
        write_trajectory_csv(directory / "trajectories" / f"traj_{i:03d}.csv", t, rate)
        side = dict(m, start_label=s, end_label=e, sample_rate=rate)
        side.setdefault("preprocessed", True)
        write_json(directory / "trajectories" / f"traj_{i:03d}.json", side)
    manifest = {"n_trajectories": len(dataset.trajectories), "digest": dataset.digest()}
    if dataset.offset is not None:
        manifest["offset"] = [float(v) for v in np.atleast_1d(dataset.offset)]
    manifest.update(extra or {})
    write_json(directory / "dataset.json", manifest)


def read_dataset(directory):
    """Load a dataset directory. Returns ``(dataset, graph)``."""
    directory = Path(directory)
    graph = read_taxonomy(directory / "taxonomy.json")
    files = sorted(
        p for p in (directory / "trajectories").iterdir() if p.name.endswith((".csv", ".csv.gz"))
    )
    if not files:
        raise ValidationError(f"no trajectory files in {directory}")
    trajs, starts, ends, meta = [], [], [], []
    for p in files:
        # processed trajectories may be shorter than the raw-recording minimum
        _, values = read_trajectory_csv(p)
        md = read_json(p.with_name(p.name.split(".")[0] + ".json"))
        trajs.append(values)
        starts.append(md.get("start_label"))
        ends.append(md.get("end_label"))
        meta.append(md)
    offset = None
    try:
        manifest = read_json(directory / "dataset.json")
        if "offset" in manifest:
            offset = np.array(manifest["offset"])
    except FileNotFoundError:
        pass
    ds = Dataset(trajs, starts, ends, meta, offset)
    ds.validate_labels(graph)
    return ds, graph
