"""Scratch: finite-difference check of compute_gradients on a toy graph."""
import numpy as np

from fraudgraph.data import SyntheticConfig, generate_synthetic
from fraudgraph.graph import DEFAULT_METAPATHS, build_trade_graph, extract_metapath_neighbors
from fraudgraph.model import Hyperparams, ModelParams, compute_gradients, cross_entropy_loss, forward, init_params
from fraudgraph.continual import FisherState, smoothing_penalty
from fraudgraph.tensors import named_copy

rng = np.random.default_rng(7)

cfg = SyntheticConfig(n_regions=1, txns_per_region=10, n_card_holders=3, n_merchants=4, seed=11)
ds = generate_synthetic(cfg)[0]
g = build_trade_graph(ds)
adjs = [extract_metapath_neighbors(g, mp) for mp in DEFAULT_METAPATHS[:2]]
hp = Hyperparams(d_hidden=8, n_heads=2, d_semantic=6)
params = init_params(g.feature_dim, [a.spec.name for a in adjs], hp, seed=3)
y = g.labels.astype(float)

anchor = {k: v + 0.1 * rng.standard_normal(v.shape) for k, v in params.to_named().items()}
fisher = {k: np.abs(rng.standard_normal(v.shape)) for k, v in params.to_named().items()}
state = FisherState(fisher=fisher, anchor=anchor, lam=1.5, gamma=0.00025)
extra = [lambda named: smoothing_penalty(named, state)]

loss0, grads = compute_gradients(g, adjs, params, y, extra_loss_terms=extra)
print("loss:", loss0)

def loss_at(named):
    p = ModelParams.from_named(named, hp)
    tr = forward(g, adjs, p)
    ce = cross_entropy_loss(tr.predictions, y)
    val, _ = smoothing_penalty(named, state)
    return ce + val

eps = 1e-5
worst = 0.0
worst_name = None
for name, arr in params.to_named().items():
    for idx in np.ndindex(arr.shape):
        named = named_copy(params.to_named())
        named[name][idx] += eps
        up = loss_at(named)
        named[name][idx] -= 2 * eps
        down = loss_at(named)
        fd = (up - down) / (2 * eps)
        an = grads[name][idx]
        denom = max(abs(fd), abs(an), 1e-8)
        rel = abs(fd - an) / denom
        if rel > worst:
            worst, worst_name = rel, (name, idx, fd, an)
print("worst rel err:", worst, worst_name)
