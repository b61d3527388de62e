"""Two-level attention network over meta-path neighborhoods.

Pipeline: project raw transaction features to a shared hidden space, run
multi-head node-level attention within each meta-path neighborhood (heads
are slices of the shared projection, outputs concatenated), fuse the
per-path embeddings with semantic-level attention, and score fraud
probability with a sigmoid classifier.

Gradients are computed by a hand-derived reverse pass over the same
structure; `compute_gradients` is exact (verified against central finite
differences) and accepts extra differentiable penalty terms defined on the
parameters, e.g. the anchored smoothing penalty used in sequential training.

All math is float64. Attention softmaxes subtract the per-row max before
exponentiation, which changes nothing semantically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericError
from .graph import MetaPathAdjacency, TradeGraph
from .seeding import derive_rng
from .tensors import named_add, named_allfinite

PRED_CLAMP = 1e-12

_ACTIVATIONS = ("elu", "relu", "tanh", "identity")


@dataclass(frozen=True)
class Hyperparams:
    d_hidden: int = 64
    n_heads: int = 8
    d_semantic: int = 128
    leaky_slope: float = 0.2
    activation: str = "elu"

    def __post_init__(self):
        if self.d_hidden <= 0 or self.n_heads <= 0 or self.d_semantic <= 0:
            raise ConfigError("d_hidden, n_heads, d_semantic must be positive")
        if self.d_hidden % self.n_heads != 0:
            raise ConfigError(
                f"d_hidden ({self.d_hidden}) must be divisible by n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.leaky_slope <= 1.0:
            raise ConfigError("leaky_slope must lie in [0, 1]")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"activation must be one of {_ACTIVATIONS}")

    @property
    def head_dim(self) -> int:
        return self.d_hidden // self.n_heads


@dataclass
class ModelParams:
    """Every learnable tensor, plus the hyperparameters that fix shapes."""

    hp: Hyperparams
    w_proj: np.ndarray  # (d_hidden, d_in)
    node_att: dict[str, np.ndarray]  # path name -> (n_heads, 2 * head_dim)
    sem_w: np.ndarray  # (d_hidden, d_semantic)
    sem_b: np.ndarray  # (d_semantic,)
    sem_q: np.ndarray  # (d_semantic,)
    clf: np.ndarray  # (d_hidden + 1,), last entry is the bias

    def to_named(self) -> dict[str, np.ndarray]:
        named = {"w_proj": self.w_proj}
        for name in sorted(self.node_att):
            named[f"node_att/{name}"] = self.node_att[name]
        named.update(sem_w=self.sem_w, sem_b=self.sem_b, sem_q=self.sem_q, clf=self.clf)
        return named

    @classmethod
    def from_named(cls, named: dict[str, np.ndarray], hp: Hyperparams) -> "ModelParams":
        node_att = {
            key.split("/", 1)[1]: named[key] for key in named if key.startswith("node_att/")
        }
        return cls(
            hp=hp,
            w_proj=named["w_proj"],
            node_att=node_att,
            sem_w=named["sem_w"],
            sem_b=named["sem_b"],
            sem_q=named["sem_q"],
            clf=named["clf"],
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_named(
            {k: v.copy() for k, v in self.to_named().items()}, self.hp
        )


def init_params(
    d_in: int, path_names: list[str], hp: Hyperparams, seed: int
) -> ModelParams:
    """Seeded fan-scaled uniform initialization; biases start at zero."""
    rng = derive_rng(seed, "init")

    def glorot(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    w_proj = glorot((hp.d_hidden, d_in), d_in, hp.d_hidden)
    node_att = {
        name: glorot((hp.n_heads, 2 * hp.head_dim), 2 * hp.head_dim, 1)
        for name in sorted(path_names)
    }
    sem_w = glorot((hp.d_hidden, hp.d_semantic), hp.d_hidden, hp.d_semantic)
    sem_b = np.zeros(hp.d_semantic)
    sem_q = glorot((hp.d_semantic,), hp.d_semantic, 1)
    clf = np.concatenate([glorot((hp.d_hidden,), hp.d_hidden, 1), [0.0]])
    return ModelParams(hp, w_proj, node_att, sem_w, sem_b, sem_q, clf)


@dataclass
class ForwardTrace:
    """All intermediates of one forward pass.

    alphas holds the attention coefficients per path per head, either as a
    flat edge array in neighbor-list order (general adjacency) or as one
    row-softmaxed matrix per clique (clique-partition adjacency); use
    `flatten_alpha` to get the flat form regardless.
    """

    path_names: list[str]
    h: np.ndarray  # (N, d_hidden)
    alphas: dict[str, list]  # per path, per head: flat array or clique matrices
    att_t: dict[str, list[np.ndarray]] = field(repr=False, default=None)
    att_s: dict[str, list[np.ndarray]] = field(repr=False, default=None)
    z_paths: dict[str, np.ndarray] = None  # per path (N, d_hidden)
    sem_tanh: dict[str, np.ndarray] = field(repr=False, default=None)
    w_scores: np.ndarray = None  # (m,)
    beta: np.ndarray = None  # (m,)
    z_fused: np.ndarray = None  # (N, d_hidden)
    logits: np.ndarray = None  # (N,)
    predictions: np.ndarray = None  # (N,)


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def _leaky_grad(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, 1.0, slope)


def _activate(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    return x


def _activate_grad_from_value(z: np.ndarray, kind: str) -> np.ndarray:
    # Each supported activation's derivative is recoverable from its value.
    if kind == "elu":
        return np.where(z > 0, 1.0, z + 1.0)
    if kind == "relu":
        return np.where(z > 0, 1.0, 0.0)
    if kind == "tanh":
        return 1.0 - z * z
    return np.ones_like(z)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(w: np.ndarray) -> np.ndarray:
    e = np.exp(w - w.max())
    return e / e.sum()


def flatten_alpha(adj: MetaPathAdjacency, alpha_entry) -> np.ndarray:
    """Attention coefficients as one flat array in neighbor-list order."""
    if isinstance(alpha_entry, np.ndarray):
        return alpha_entry
    flat = np.empty(adj.n_edges, dtype=np.float64)
    for mat, pos in zip(alpha_entry, adj.group_pos):
        flat[pos] = mat.ravel()
    return flat


def _head_attention_forward(hk, adj, a_row, slope):
    """One attention head over one meta-path: returns (t, s, alpha, agg).

    t and s are the target/neighbor halves of the additive logit; alpha is
    flat in neighbor-list order (general path) or a list of per-clique
    row-softmax matrices (clique path); agg is the pre-activation weighted
    neighbor aggregate.

    The clique branch exploits that LeakyReLU is monotone (row max of the
    logit matrix is the logit at the max neighbor score) and normalizes the
    coefficient matrix in place.
    """
    dd = hk.shape[1]
    t = hk @ a_row[:dd]
    s = hk @ a_row[dd:]
    n = adj.n_nodes
    agg = np.empty((n, dd), dtype=np.float64)
    if adj.groups is not None:
        alpha = []
        for group in adj.groups:
            tg = t[group]
            sg = s[group]
            e = np.add.outer(tg, sg)
            np.maximum(e * slope, e, out=e)  # LeakyReLU for slope in [0, 1]
            peak = tg + sg.max()
            rowmax = np.maximum(peak * slope, peak)
            e -= rowmax[:, None]
            np.exp(e, out=e)
            e /= e.sum(axis=1, keepdims=True)
            agg[group] = e @ hk[group]
            alpha.append(e)
    else:
        starts = adj.offsets[:-1]
        pre = t[adj.flat_src] + s[adj.flat_dst]
        e = _leaky(pre, slope)
        seg_max = np.maximum.reduceat(e, starts)
        ex = np.exp(e - np.repeat(seg_max, adj.counts))
        denom = np.add.reduceat(ex, starts)
        alpha = ex / np.repeat(denom, adj.counts)
        agg[:] = np.add.reduceat(alpha[:, None] * hk[adj.flat_dst], starts, axis=0)
    return t, s, alpha, agg


def _head_attention_backward(hk, adj, a_row, t, s, alpha, dagg, slope):
    """Adjoints of one head given d(loss)/d(agg); returns (dhk, da_row)."""
    dd = hk.shape[1]
    dhk = np.zeros_like(hk)
    dt = np.zeros(adj.n_nodes, dtype=np.float64)
    ds = np.zeros(adj.n_nodes, dtype=np.float64)
    if adj.groups is not None:
        for group, a_mat in zip(adj.groups, alpha):
            dagg_g = dagg[group]
            hg = hk[group]
            d_amat = dagg_g @ hg.T
            dhk[group] += a_mat.T @ dagg_g
            rowdot = np.einsum("ij,ij->i", a_mat, d_amat)
            d_amat -= rowdot[:, None]
            d_amat *= a_mat  # now d(loss)/d(logits) before the LeakyReLU slope
            pre = np.add.outer(t[group], s[group])
            d_amat *= np.where(pre > 0, 1.0, slope)
            dt[group] += d_amat.sum(axis=1)
            ds[group] += d_amat.sum(axis=0)
    else:
        starts = adj.offsets[:-1]
        src, dst = adj.flat_src, adj.flat_dst
        dalpha = (dagg[src] * hk[dst]).sum(axis=1)
        np.add.at(dhk, dst, alpha[:, None] * dagg[src])
        rowdot = np.add.reduceat(alpha * dalpha, starts)
        de = alpha * (dalpha - np.repeat(rowdot, adj.counts))
        pre = t[src] + s[dst]
        dpre = de * _leaky_grad(pre, slope)
        dt[:] = np.add.reduceat(dpre, starts)
        np.add.at(ds, dst, dpre)
    dhk += np.outer(dt, a_row[:dd]) + np.outer(ds, a_row[dd:])
    da_row = np.concatenate([hk.T @ dt, hk.T @ ds])
    return dhk, da_row


def _features_of(g) -> np.ndarray:
    if isinstance(g, TradeGraph):
        return g.features
    return np.asarray(g, dtype=np.float64)


def project_features(X, params: ModelParams) -> np.ndarray:
    """Shared-space projection: h = X @ w_proj^T, shape (N, d_hidden)."""
    X = _features_of(X)
    if X.shape[1] != params.w_proj.shape[1]:
        raise DimensionError(
            f"feature width {X.shape[1]} does not match projection input "
            f"width {params.w_proj.shape[1]}"
        )
    return X @ params.w_proj.T


def node_level_attention(h, adj: MetaPathAdjacency, params: ModelParams, head: int):
    """Softmax attention over one head's slice of h within adj's neighborhoods.

    Returns (alpha, z): alpha is flat in neighbor-list order (segment k of
    node i spans adj.offsets[i]:adj.offsets[i+1]); z is the activated
    aggregate of width head_dim.
    """
    hp = params.hp
    if not 0 <= head < hp.n_heads:
        raise ConfigError(f"head index {head} out of range for {hp.n_heads} heads")
    if adj.spec.name not in params.node_att:
        raise ConfigError(f"no attention parameters for meta-path {adj.spec.name!r}")
    dd = hp.head_dim
    hk = np.ascontiguousarray(h[:, head * dd : (head + 1) * dd])
    a_row = params.node_att[adj.spec.name][head]
    _, _, alpha, agg = _head_attention_forward(hk, adj, a_row, hp.leaky_slope)
    return flatten_alpha(adj, alpha), _activate(agg, hp.activation)


def semantic_attention(z_list: list[np.ndarray], params: ModelParams):
    """Learned convex combination of per-path embeddings.

    Each path's score is the node-averaged projection q . tanh(z W + b);
    scores are softmax-normalized into beta and the fused embedding is
    sum(beta_p * z_p).
    """
    if not z_list:
        raise ConfigError("semantic attention needs at least one path embedding")
    shape = z_list[0].shape
    for z in z_list:
        if z.shape != shape:
            raise DimensionError("per-path embeddings must share one shape")
    w = np.array(
        [np.mean(np.tanh(z @ params.sem_w + params.sem_b) @ params.sem_q) for z in z_list]
    )
    beta = _softmax(w)
    z_fused = sum(b * z for b, z in zip(beta, z_list))
    return beta, z_fused


def classify(z_fused: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-node fraud probability: sigmoid of a dense layer with bias."""
    if z_fused.shape[1] != params.clf.size - 1:
        raise DimensionError(
            f"fused width {z_fused.shape[1]} does not match classifier width "
            f"{params.clf.size - 1}"
        )
    return _sigmoid(z_fused @ params.clf[:-1] + params.clf[-1])


def cross_entropy_loss(predictions: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy with predictions clamped away from {0, 1}."""
    predictions = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if predictions.size == 0:
        raise ConfigError("cross-entropy over an empty prediction set")
    if predictions.shape != y.shape:
        raise DimensionError("predictions and labels must have the same length")
    p = np.clip(predictions, PRED_CLAMP, 1.0 - PRED_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def forward(g, adjs: list[MetaPathAdjacency], params: ModelParams) -> ForwardTrace:
    """Full pass: project, per-path multi-head node attention with head
    concatenation, semantic fusion, classification."""
    hp = params.hp
    X = _features_of(g)
    h = project_features(X, params)
    names = [adj.spec.name for adj in adjs]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate meta-path names in adjacency list")
    alphas: dict[str, list[np.ndarray]] = {}
    att_t: dict[str, list[np.ndarray]] = {}
    att_s: dict[str, list[np.ndarray]] = {}
    z_paths: dict[str, np.ndarray] = {}
    dd = hp.head_dim
    for adj in adjs:
        name = adj.spec.name
        if name not in params.node_att:
            raise ConfigError(f"no attention parameters for meta-path {name!r}")
        att = params.node_att[name]
        alphas[name], att_t[name], att_s[name] = [], [], []
        cols = []
        for k in range(hp.n_heads):
            hk = np.ascontiguousarray(h[:, k * dd : (k + 1) * dd])
            t, s, alpha, agg = _head_attention_forward(hk, adj, att[k], hp.leaky_slope)
            alphas[name].append(alpha)
            att_t[name].append(t)
            att_s[name].append(s)
            cols.append(_activate(agg, hp.activation))
        z_paths[name] = np.concatenate(cols, axis=1)
    sem_tanh = {
        name: np.tanh(z_paths[name] @ params.sem_w + params.sem_b) for name in names
    }
    w_scores = np.array([np.mean(sem_tanh[name] @ params.sem_q) for name in names])
    beta = _softmax(w_scores)
    z_fused = sum(b * z_paths[name] for b, name in zip(beta, names))
    logits = z_fused @ params.clf[:-1] + params.clf[-1]
    preds = _sigmoid(logits)
    return ForwardTrace(
        path_names=names,
        h=h,
        alphas=alphas,
        att_t=att_t,
        att_s=att_s,
        z_paths=z_paths,
        sem_tanh=sem_tanh,
        w_scores=w_scores,
        beta=beta,
        z_fused=z_fused,
        logits=logits,
        predictions=preds,
    )


def predict(g, adjs: list[MetaPathAdjacency], params: ModelParams) -> np.ndarray:
    return forward(g, adjs, params).predictions


def backward_from_dlogits(
    X,
    adjs: list[MetaPathAdjacency],
    params: ModelParams,
    trace: ForwardTrace,
    dlogits: np.ndarray,
) -> dict[str, np.ndarray]:
    """Reverse pass from d(loss)/d(logits) to every parameter tensor.

    The pass is linear in dlogits, which lets callers backpropagate
    arbitrary seeds (full-batch loss, single-sample losses for Fisher
    estimation) through one shared forward trace.
    """
    hp = params.hp
    X = _features_of(X)
    n = X.shape[0]
    names = trace.path_names
    adj_by_name = {adj.spec.name: adj for adj in adjs}
    dd = hp.head_dim

    dclf = np.concatenate([trace.z_fused.T @ dlogits, [dlogits.sum()]])
    dz_fused = np.outer(dlogits, params.clf[:-1])

    dbeta = np.array([np.sum(dz_fused * trace.z_paths[name]) for name in names])
    dz_paths = {name: b * dz_fused for b, name in zip(trace.beta, names)}

    # softmax over path scores
    dw = trace.beta * (dbeta - float(trace.beta @ dbeta))

    dsem_w = np.zeros_like(params.sem_w)
    dsem_b = np.zeros_like(params.sem_b)
    dsem_q = np.zeros_like(params.sem_q)
    for i, name in enumerate(names):
        tanh_vals = trace.sem_tanh[name]
        dsem_q += (dw[i] / n) * tanh_vals.sum(axis=0)
        du = (dw[i] / n) * (1.0 - tanh_vals * tanh_vals) * params.sem_q[None, :]
        dsem_w += trace.z_paths[name].T @ du
        dsem_b += du.sum(axis=0)
        dz_paths[name] = dz_paths[name] + du @ params.sem_w.T

    dh = np.zeros_like(trace.h)
    d_att = {name: np.zeros_like(params.node_att[name]) for name in params.node_att}
    for name in names:
        adj = adj_by_name[name]
        att = params.node_att[name]
        dzp = dz_paths[name]
        zp = trace.z_paths[name]
        for k in range(hp.n_heads):
            sl = slice(k * dd, (k + 1) * dd)
            dagg = dzp[:, sl] * _activate_grad_from_value(zp[:, sl], hp.activation)
            hk = np.ascontiguousarray(trace.h[:, sl])
            dhk, da_row = _head_attention_backward(
                hk,
                adj,
                att[k],
                trace.att_t[name][k],
                trace.att_s[name][k],
                trace.alphas[name][k],
                dagg,
                hp.leaky_slope,
            )
            dh[:, sl] += dhk
            d_att[name][k] = da_row

    dw_proj = dh.T @ X

    grads = {"w_proj": dw_proj}
    for name in sorted(params.node_att):
        grads[f"node_att/{name}"] = d_att[name]
    grads.update(sem_w=dsem_w, sem_b=dsem_b, sem_q=dsem_q, clf=dclf)
    return grads


def loss_seed_dlogits(
    predictions: np.ndarray, y: np.ndarray, node_idx: np.ndarray | None = None
) -> np.ndarray:
    """d(mean clamped BCE over node_idx)/d(logits), zero off the index set."""
    y = np.asarray(y, dtype=np.float64)
    dlogits = np.zeros_like(predictions)
    if node_idx is None:
        node_idx = np.arange(predictions.size)
    p = predictions[node_idx]
    inside = (p > PRED_CLAMP) & (p < 1.0 - PRED_CLAMP)
    dlogits[node_idx] = np.where(inside, (p - y[node_idx]) / node_idx.size, 0.0)
    return dlogits


def compute_gradients(
    g,
    adjs: list[MetaPathAdjacency],
    params: ModelParams,
    y: np.ndarray,
    extra_loss_terms=None,
    node_idx: np.ndarray | None = None,
    trace: ForwardTrace | None = None,
):
    """Exact gradients of mean cross-entropy (over node_idx, default all
    transaction nodes) plus any extra differentiable parameter penalties.

    Each extra term is a callable mapping the named parameter dict to
    (value, named gradient dict). Returns (total loss, named gradients).
    """
    if trace is None:
        trace = forward(g, adjs, params)
    y = np.asarray(y, dtype=np.float64)
    if node_idx is None:
        node_idx = np.arange(trace.predictions.size)
    node_idx = np.asarray(node_idx, dtype=np.int64)
    loss = cross_entropy_loss(trace.predictions[node_idx], y[node_idx])
    dlogits = loss_seed_dlogits(trace.predictions, y, node_idx)
    grads = backward_from_dlogits(g, adjs, params, trace, dlogits)
    if extra_loss_terms:
        named = params.to_named()
        for term in extra_loss_terms:
            value, term_grads = term(named)
            loss += value
            named_add(grads, term_grads)
    bad = named_allfinite(grads)
    if bad is not None:
        raise NumericError(f"non-finite gradient for parameter {bad!r}")
    return loss, grads
