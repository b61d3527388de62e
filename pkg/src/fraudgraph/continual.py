"""Forgetting prevention across sequential regions.

Two mechanisms, independently switchable:

- Knowledge replay: sample a labeled buffer from the previous region, build
  Gaussian twins around per-class feature prototypes, and graft both into
  the next region's graph so old-region structure keeps receiving gradient.
- Parameter smoothing: a diagonal Fisher-weighted quadratic penalty anchors
  the new parameters to the previous task's optimum, plus a small global
  norm regularizer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, featurize_record
from .errors import ConfigError, DimensionError, NumericError
from .graph import MetaPathAdjacency, ReplayTransaction
from .model import (
    ModelParams,
    backward_from_dlogits,
    cross_entropy_loss,
    forward,
    loss_seed_dlogits,
    PRED_CLAMP,
)
from .seeding import derive_rng
from .tensors import check_same_layout, named_allfinite, named_norm, named_zeros_like


@dataclass
class ReplayBuffer:
    source_region: int
    ratio: float
    samples: list[ReplayTransaction]


@dataclass
class PrototypeSet:
    """Per-class feature prototypes and the Gaussian twin buffer they spawn."""

    class_means: dict[int, np.ndarray]
    class_sigma: dict[int, np.ndarray]
    twins: list[ReplayTransaction]


@dataclass
class FisherState:
    """Importance weights and anchor parameters from the previous task."""

    fisher: dict[str, np.ndarray]
    anchor: dict[str, np.ndarray]
    lam: float
    gamma: float


def sample_replay_buffer(
    region_data: Dataset, ratio: float, seed: int, source_region: int = 0
) -> ReplayBuffer:
    """Uniform sample without replacement of round(ratio * N) transactions."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"replay ratio must lie in (0, 1], got {ratio}")
    n = len(region_data)
    if n == 0:
        raise ConfigError("cannot sample a replay buffer from an empty region")
    k = round(ratio * n)
    rng = derive_rng(seed, "replay")
    picks = np.sort(rng.choice(n, size=k, replace=False))
    samples = []
    for j, i in enumerate(picks):
        rec = region_data.records[int(i)]
        samples.append(
            ReplayTransaction(
                txn_id=f"replay:r{source_region}:{rec.txn_id}",
                features=featurize_record(rec),
                card_holder_id=rec.card_holder_id,
                merchant_id=rec.merchant_id,
                time_slice=rec.hour_slice(),
                label=rec.label,
            )
        )
    return ReplayBuffer(source_region=source_region, ratio=ratio, samples=samples)


def generate_prototypes(
    buf: ReplayBuffer, sigma_scale: float, seed: int
) -> PrototypeSet:
    """One Gaussian twin per buffer sample, centered on its class prototype.

    The prototype of a class is the mean feature vector of that class's
    buffer entries; the twin scatter is sigma_scale times the class's
    per-dimension standard deviation. Twins inherit the label and entity
    ids of their source sample, so they wire into the same neighborhoods.
    """
    if not buf.samples:
        raise ConfigError("cannot build prototypes from an empty buffer")
    if sigma_scale < 0:
        raise ConfigError("sigma_scale must be nonnegative")
    feats = np.stack([s.features for s in buf.samples])
    labels = np.array([s.label for s in buf.samples])
    class_means: dict[int, np.ndarray] = {}
    class_sigma: dict[int, np.ndarray] = {}
    for cls in (0, 1):
        members = feats[labels == cls]
        if members.shape[0] == 0:
            warnings.warn(
                f"class {cls} absent from replay buffer; it yields no twins",
                stacklevel=2,
            )
            continue
        if members.shape[0] == 1:
            warnings.warn(
                f"class {cls} has a single buffer sample; its twin scatter is zero",
                stacklevel=2,
            )
        class_means[cls] = members.mean(axis=0)
        class_sigma[cls] = sigma_scale * members.std(axis=0)
    rng = derive_rng(seed, "proto")
    noise = rng.standard_normal(feats.shape)
    twins = []
    for j, src in enumerate(buf.samples):
        x = class_means[src.label] + noise[j] * class_sigma[src.label]
        twins.append(
            ReplayTransaction(
                txn_id=f"twin:r{buf.source_region}:{j:06d}",
                features=x,
                card_holder_id=src.card_holder_id,
                merchant_id=src.merchant_id,
                time_slice=src.time_slice,
                label=src.label,
            )
        )
    return PrototypeSet(class_means=class_means, class_sigma=class_sigma, twins=twins)


def compute_fisher(
    g,
    adjs: list[MetaPathAdjacency],
    params: ModelParams,
    y: np.ndarray,
    node_idx: np.ndarray | None = None,
    max_samples: int | None = None,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Diagonal Fisher information: mean squared per-sample loss gradient.

    Each transaction node contributes the elementwise square of the gradient
    of its own (unaveraged) cross-entropy term; backward passes share one
    forward trace. `max_samples` caps the node count by seeded subsampling
    for large graphs.
    """
    y = np.asarray(y, dtype=np.float64)
    trace = forward(g, adjs, params)
    if node_idx is None:
        node_idx = np.arange(trace.predictions.size)
    node_idx = np.asarray(node_idx, dtype=np.int64)
    if max_samples is not None and node_idx.size > max_samples:
        rng = derive_rng(seed, "fisher-subsample")
        node_idx = np.sort(rng.choice(node_idx, size=max_samples, replace=False))
    fisher = named_zeros_like(params.to_named())
    preds = trace.predictions
    for i in node_idx:
        p = preds[i]
        dlogits = np.zeros_like(preds)
        if PRED_CLAMP < p < 1.0 - PRED_CLAMP:
            dlogits[i] = p - y[i]
        grads = backward_from_dlogits(g, adjs, params, trace, dlogits)
        for name in fisher:
            fisher[name] += grads[name] * grads[name]
    for name in fisher:
        fisher[name] /= node_idx.size
    bad = named_allfinite(fisher)
    if bad is not None:
        raise NumericError(f"non-finite Fisher entry for parameter {bad!r}")
    return fisher


def smoothing_penalty(
    params_named: dict[str, np.ndarray], state: FisherState
) -> tuple[float, dict[str, np.ndarray]]:
    """Value and gradient of the anchored smoothing loss.

    value = lam/2 * sum_i F_i (theta_i - anchor_i)^2
          + gamma * (||theta||_2 + ||anchor||_2)

    where the norms are global l2 norms over all parameters. The anchor-norm
    addend is constant in theta; the norm term's gradient at theta = 0 is
    taken as 0.
    """
    check_same_layout(params_named, state.fisher)
    check_same_layout(params_named, state.anchor)
    quad = 0.0
    grads = {}
    for name, theta in params_named.items():
        diff = theta - state.anchor[name]
        quad += float(np.sum(state.fisher[name] * diff * diff))
        grads[name] = state.lam * state.fisher[name] * diff
    norm_now = named_norm(params_named)
    norm_old = named_norm(state.anchor)
    value = 0.5 * state.lam * quad + state.gamma * (norm_now + norm_old)
    if norm_now > 0.0:
        scale = state.gamma / norm_now
        for name, theta in params_named.items():
            grads[name] = grads[name] + scale * theta
    return value, grads


def smoothing_loss(params: ModelParams | dict, state: FisherState) -> float:
    named = params.to_named() if isinstance(params, ModelParams) else params
    value, _ = smoothing_penalty(named, state)
    return value


def total_objective(
    g,
    adjs: list[MetaPathAdjacency],
    params: ModelParams,
    y: np.ndarray,
    state: FisherState | None = None,
    node_idx: np.ndarray | None = None,
) -> float:
    """Cross-entropy over the labeled nodes plus the smoothing penalty.

    With no state (first region, or smoothing disabled) this is plain
    cross-entropy.
    """
    trace = forward(g, adjs, params)
    y = np.asarray(y, dtype=np.float64)
    if node_idx is None:
        node_idx = np.arange(trace.predictions.size)
    node_idx = np.asarray(node_idx, dtype=np.int64)
    loss = cross_entropy_loss(trace.predictions[node_idx], y[node_idx])
    if state is not None:
        loss += smoothing_loss(params, state)
    return loss
