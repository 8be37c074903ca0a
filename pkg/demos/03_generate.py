"""Generate new motions from a trained GPHDM.

Four generators: mean prediction rolled out by the dynamics, conditional
optimization between anchors, the plain hyperbolic geodesic, and the
geodesic of the decoder's expected pullback metric, which bends towards
well-supported latent regions and so decodes with lower variance.

Run: python3 demos/03_generate.py     (about two minutes)
"""

import warnings

import numpy as np

from gphdm.data import TaxonomyGraph, synthesize
from gphdm.generate import conditional_optimize, hyperbolic_geodesic, mean_predict, pullback_geodesic
from gphdm.model import ModelConfig, initialize

graph = TaxonomyGraph.binary_tree(3)
data = synthesize(graph, seed=0)
model = initialize(data, graph, ModelConfig.for_model("gphdm", seed=0))
model.train()

start = model.X[0]
rollout = mean_predict(model, start, steps=15)
print("mean prediction: 16 latents, mean decoded variance", rollout.mean_variance)

a, b = graph.leaves()[:2]
xa, xb = model.node_latent(a), model.node_latent(b)
geo = hyperbolic_geodesic(xa, xb, 20, model=model)
pull = pullback_geodesic(model, xa, xb, M=20)
print(f"{a} -> {b}: geodesic variance {geo.mean_variance:.3e}, pullback variance {pull.mean_variance:.3e}")

# leaf-to-leaf runs partly against the recorded motions, so expect a flow warning
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    cond = conditional_optimize(model, [(0, xa), (19, xb)], 20)
print("conditional path variance", cond.mean_variance, "| warnings:", [str(w.message) for w in caught])

pull.write_json("pullback_path.json")
print("wrote pullback_path.json; overlay it with `gphdm export ... --svg --path pullback_path.json`")
