"""Train GPLVM, GPDM, GPHLVM and GPHDM on a synthetic taxonomy and compare them.

The data are smooth motions, one family per leaf of a depth-3 binary tree,
each branching off its parent's motion. Dynamics (GPDM/GPHDM) should make
latent trajectories smooth (small MSJ); hyperbolic geometry should keep the
latent layout faithful to the tree (small stress).

Run: python3 demos/02_compare_models.py     (a few minutes)
"""

import numpy as np

from gphdm.data import TaxonomyGraph, synthesize
from gphdm.evaluation import run_comparison
from gphdm.model import ModelConfig, initialize
from gphdm import manifold as mf

graph = TaxonomyGraph.binary_tree(3)
data = synthesize(graph, seed=0)
print(f"{len(data.trajectories)} trajectories, {data.n_points} frames, leaves {graph.leaves()}")

report = run_comparison(data, graph, latent_dims=(2,), seed=0)
print(report.to_text())

# where did the GPHDM put the taxonomy nodes?
model = initialize(data, graph, ModelConfig.for_model("gphdm", seed=0))
model.train()
for node in graph.nodes:
    x = model.node_latent(node)
    print(f"{node:>5s}: Poincare {np.round(mf.poincare_from_lorentz(x), 3)}  depth-radius {mf.distance(mf.origin(2), x):.2f}")
