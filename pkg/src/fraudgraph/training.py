"""Optimization and the cross-region training protocol.

Per-region training is full-graph gradient descent with Adam (decoupled
weight decay) and early stopping on validation AUC. A sequence run trains
regions in order: after each region it snapshots the optimum, estimates
diagonal Fisher importances, and samples a replay buffer; the next region
trains on its graph merged with replay plus prototype twins, under the
anchored smoothing penalty. Ablation variants switch either mechanism off.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .continual import (
    FisherState,
    compute_fisher,
    generate_prototypes,
    sample_replay_buffer,
    smoothing_penalty,
)
from .data import Dataset, split_indices, take
from .errors import ConfigError, NumericError
from .graph import (
    DEFAULT_METAPATHS,
    build_trade_graph,
    extract_metapath_neighbors,
    merge_replay_into_graph,
)
from .metrics import auc_score, evaluate
from .model import (
    Hyperparams,
    ModelParams,
    compute_gradients,
    cross_entropy_loss,
    forward,
    init_params,
    predict,
)
from .errors import MetricError
from .seeding import derive_seed
from .tensors import check_same_layout, named_copy

VARIANTS = ("full", "no_rps", "no_pkr", "naive")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    weight_decay: float = 0.001
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    replay_ratio: float = 0.15
    smoothing_lambda: float = 1.5
    smoothing_gamma: float = 0.00025
    variant: str = "full"
    d_hidden: int = 64
    n_heads: int = 8
    d_semantic: int = 128
    leaky_slope: float = 0.2
    activation: str = "elu"
    train_ratio: float = 0.6
    val_ratio: float = 0.1
    prototype_sigma_scale: float = 0.1
    fisher_max_samples: int | None = None
    threshold: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be nonnegative")
        if self.max_epochs <= 0:
            raise ConfigError("max_epochs must be positive")
        if not 0 <= self.patience <= self.max_epochs:
            raise ConfigError("patience must lie in [0, max_epochs]")
        if not 0.0 < self.replay_ratio <= 1.0:
            raise ConfigError("replay_ratio must lie in (0, 1]")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not (0 < self.train_ratio < 1 and 0 < self.val_ratio < 1):
            raise ConfigError("train_ratio and val_ratio must lie in (0, 1)")
        if self.train_ratio + self.val_ratio >= 1:
            raise ConfigError("train_ratio + val_ratio must leave room for a test split")

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            d_hidden=self.d_hidden,
            n_heads=self.n_heads,
            d_semantic=self.d_semantic,
            leaky_slope=self.leaky_slope,
            activation=self.activation,
        )

    def split_ratios(self) -> tuple[float, float, float]:
        return (self.train_ratio, self.val_ratio, 1.0 - self.train_ratio - self.val_ratio)

    def uses_replay(self) -> bool:
        return self.variant in ("full", "no_rps")

    def uses_smoothing(self) -> bool:
        return self.variant in ("full", "no_pkr")


@dataclass
class OptimizerState:
    """Adam moment accumulators, laid out like the parameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, named: dict[str, np.ndarray]) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(v) for k, v in named.items()},
            v={k: np.zeros_like(v) for k, v in named.items()},
        )


def optimizer_step(
    params_named: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    opt: OptimizerState,
    lr: float,
    weight_decay: float,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One Adam step with weight decay decoupled from the adaptive moments.

    Decay shrinks parameters by lr * weight_decay before the moment update,
    so a zero-gradient step still contracts them by exactly that factor.
    """
    check_same_layout(params_named, grads)
    check_same_layout(params_named, opt.m)
    step = opt.step + 1
    bc1 = 1.0 - opt.beta1**step
    bc2 = 1.0 - opt.beta2**step
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params_named.items():
        g = grads[name]
        theta = theta * (1.0 - lr * weight_decay)
        m = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        v = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
        theta = theta - update
        if not np.all(np.isfinite(theta)):
            raise NumericError(f"non-finite update for parameter {name!r}")
        new_params[name] = theta
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(
        m=new_m, v=new_v, step=step, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps
    )


def _monitor_score(preds, labels, train_idx, val_idx):
    """Early-stopping monitor, a lexicographic (AUC, -loss) pair.

    Validation AUC is the primary signal; validation loss breaks exact AUC
    ties so calibration keeps improving through rank plateaus. Single-class
    validation splits (tiny toys) fall back to loss alone, as does training
    loss when no validation split exists.
    """
    if val_idx is None or len(val_idx) == 0:
        return (-cross_entropy_loss(preds[train_idx], labels[train_idx]),), None
    val_loss = cross_entropy_loss(preds[val_idx], labels[val_idx])
    try:
        auc = auc_score(preds[val_idx], labels[val_idx])
        return (auc, -val_loss), auc
    except MetricError:
        return (-val_loss,), None


def train_region(
    g,
    adjs,
    params: ModelParams,
    cfg: TrainConfig,
    state: FisherState | None = None,
    train_idx: np.ndarray | None = None,
    val_idx: np.ndarray | None = None,
):
    """Train on one region's graph; returns (best parameters, epoch history).

    Runs at most max_epochs full-graph steps on cross-entropy over train_idx
    plus the smoothing penalty when state is given; keeps the parameters of
    the best validation epoch and stops once `patience` epochs pass without
    improvement. Each epoch's forward pass serves both the gradient step and
    the validation scoring of the previous step's parameters, so an epoch
    costs a single forward/backward.
    """
    labels = g.labels.astype(np.float64)
    if train_idx is None:
        train_idx = np.arange(g.n_transactions)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ConfigError("train_region needs at least one labeled training node")
    extra = [lambda named: smoothing_penalty(named, state)] if state is not None else None

    named = named_copy(params.to_named())
    opt = OptimizerState.init_like(named)
    best_named = named_copy(named)
    best_score = None
    wait = 0
    history = []
    stopped = False
    for epoch in range(1, cfg.max_epochs + 1):
        current = ModelParams.from_named(named, params.hp)
        trace = forward(g, adjs, current)
        if epoch > 1:
            # trace scores the parameters produced by the previous step
            score, val_auc = _monitor_score(trace.predictions, labels, train_idx, val_idx)
            history[-1]["val_auc"] = val_auc
            if best_score is None or score > best_score:
                best_score = score
                best_named = named_copy(named)
                wait = 0
            else:
                wait += 1
            if wait >= cfg.patience:
                stopped = True
                break
        loss, grads = compute_gradients(
            g, adjs, current, labels, extra_loss_terms=extra, node_idx=train_idx, trace=trace
        )
        named, opt = optimizer_step(named, grads, opt, cfg.learning_rate, cfg.weight_decay)
        history.append({"epoch": epoch, "train_loss": float(loss), "val_auc": None})
    if not stopped:
        # the parameters after the last step were never scored
        final = ModelParams.from_named(named, params.hp)
        preds = predict(g, adjs, final)
        score, val_auc = _monitor_score(preds, labels, train_idx, val_idx)
        history[-1]["val_auc"] = val_auc
        if best_score is None or score > best_score:
            best_named = named_copy(named)
    return ModelParams.from_named(best_named, params.hp), history


@dataclass
class SequenceResult:
    """Everything a sequence run produced, timings kept separate from the
    deterministic metric payload."""

    n_regions: int
    checkpoints: list[dict] = field(default_factory=list)
    curve_rows: list[tuple[int, int, float]] = field(default_factory=list)
    per_region_final: list[dict] = field(default_factory=list)
    averages: dict = field(default_factory=dict)
    epochs_per_region: list[int] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def report_dict(self) -> dict:
        return {
            "n_regions": self.n_regions,
            "per_region": self.per_region_final,
            "averages": self.averages,
            "forgetting_curves": [
                {"task_index": t, "region_id": r, "auc": a} for t, r, a in self.curve_rows
            ],
            "epochs_per_region": self.epochs_per_region,
        }


def _region_setup(regions: list[Dataset], cfg: TrainConfig, metapaths):
    prepared = []
    for l, ds in enumerate(regions):
        tr, va, te = split_indices(len(ds), cfg.split_ratios(), derive_seed(cfg.seed, "split", l))
        graph = build_trade_graph(ds)
        adjs = [extract_metapath_neighbors(graph, mp) for mp in metapaths]
        prepared.append({"ds": ds, "graph": graph, "adjs": adjs, "train": tr, "val": va, "test": te})
    return prepared


def run_sequence(
    regions: list[Dataset], cfg: TrainConfig, metapaths=DEFAULT_METAPATHS
) -> SequenceResult:
    """Train across a region sequence with the configured variant.

    Region graphs are transductive: each region's full graph is built once
    and its train/val/test node index sets drive the loss and metrics.
    Replay merges only touch the training copy of a graph; evaluation always
    runs on the pristine region graph.
    """
    if not regions:
        raise ConfigError("run_sequence needs at least one region")
    prepared = _region_setup(regions, cfg, metapaths)
    d_in = prepared[0]["graph"].feature_dim
    for p in prepared:
        if p["graph"].feature_dim != d_in:
            raise ConfigError("all regions must share one feature width")
    hp = cfg.hyperparams()
    path_names = [mp.name for mp in metapaths]
    params = init_params(d_in, path_names, hp, cfg.seed)

    result = SequenceResult(n_regions=len(regions))
    theta_prev = None
    fisher_prev = None
    started = time.perf_counter()
    for l, prep in enumerate(prepared):
        t0 = time.perf_counter()
        g_train, adjs_train, train_idx = prep["graph"], prep["adjs"], prep["train"]
        if l > 0 and cfg.uses_replay():
            prev = prepared[l - 1]
            buf = sample_replay_buffer(
                take(prev["ds"], prev["train"]),
                cfg.replay_ratio,
                derive_seed(cfg.seed, "replay", l - 1),
                source_region=l - 1,
            )
            grafts = list(buf.samples)
            if buf.samples:
                protos = generate_prototypes(
                    buf, cfg.prototype_sigma_scale, derive_seed(cfg.seed, "proto", l - 1)
                )
                grafts += protos.twins
            if grafts:
                g_train = merge_replay_into_graph(prep["graph"], grafts)
                adjs_train = [extract_metapath_neighbors(g_train, mp) for mp in metapaths]
                train_idx = np.concatenate(
                    [
                        train_idx,
                        np.arange(prep["graph"].n_transactions, g_train.n_transactions),
                    ]
                )
        state = None
        if l > 0 and cfg.uses_smoothing():
            state = FisherState(
                fisher=fisher_prev,
                anchor=theta_prev,
                lam=cfg.smoothing_lambda,
                gamma=cfg.smoothing_gamma,
            )
        params, history = train_region(
            g_train, adjs_train, params, cfg, state=state, train_idx=train_idx, val_idx=prep["val"]
        )
        result.epochs_per_region.append(len(history))
        theta_prev = named_copy(params.to_named())
        fisher_here = None
        if cfg.uses_smoothing() and l < len(prepared) - 1:
            fisher_here = compute_fisher(
                g_train,
                adjs_train,
                params,
                g_train.labels,
                node_idx=prep["train"],
                max_samples=cfg.fisher_max_samples,
                seed=derive_seed(cfg.seed, "fisher", l),
            )
            fisher_prev = fisher_here
        result.checkpoints.append(
            {"task_index": l, "params": theta_prev, "fisher": fisher_here}
        )
        for r in range(l + 1):
            seen = prepared[r]
            preds = predict(seen["graph"], seen["adjs"], params)
            auc = auc_score(preds[seen["test"]], seen["graph"].labels[seen["test"]])
            result.curve_rows.append((l, r, float(auc)))
        result.timings[f"region_{l}_seconds"] = time.perf_counter() - t0

    for r, prep in enumerate(prepared):
        preds = predict(prep["graph"], prep["adjs"], params)
        te = prep["test"]
        recall, auc, f1 = evaluate(preds[te], prep["graph"].labels[te], cfg.threshold)
        result.per_region_final.append(
            {"region_id": r, "recall": float(recall), "auc": float(auc), "f1": float(f1)}
        )
    for key in ("recall", "auc", "f1"):
        result.averages[key] = float(
            np.mean([m[key] for m in result.per_region_final])
        )
    result.timings["total_seconds"] = time.perf_counter() - started
    return result


def emit_forgetting_curves(result: SequenceResult) -> list[tuple[int, int, float]]:
    """(task_index, region_id, auc) rows: after each completed task, the AUC
    on every already-seen region's test set."""
    return list(result.curve_rows)


def train_single_region(
    ds: Dataset, cfg: TrainConfig, metapaths=DEFAULT_METAPATHS
) -> tuple[dict, ModelParams]:
    """Single-region train/evaluate at cfg's split ratios; returns (metrics, params)."""
    tr, va, te = split_indices(len(ds), cfg.split_ratios(), derive_seed(cfg.seed, "split", 0))
    graph = build_trade_graph(ds)
    adjs = [extract_metapath_neighbors(graph, mp) for mp in metapaths]
    params = init_params(graph.feature_dim, [mp.name for mp in metapaths], cfg.hyperparams(), cfg.seed)
    params, history = train_region(graph, adjs, params, cfg, train_idx=tr, val_idx=va)
    preds = predict(graph, adjs, params)
    recall, auc, f1 = evaluate(preds[te], graph.labels[te], cfg.threshold)
    metrics = {
        "train_fraction": cfg.train_ratio,
        "recall": float(recall),
        "auc": float(auc),
        "f1": float(f1),
        "epochs": len(history),
        "n_train": int(len(tr)),
        "n_val": int(len(va)),
        "n_test": int(len(te)),
    }
    return metrics, params
