"""Heterogeneous transaction graphs and meta-path adjacency.

A graph has four node types: transactions (the only featured, labeled type),
card holders, merchants, and hour-of-day time slices. Each transaction links
to exactly one node of each entity type, so a two-hop meta-path through an
entity type partitions transactions into cliques of entity-sharing nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ConfigError, DimensionError, DuplicateIdError

NODE_TYPES = ("transaction", "card_holder", "merchant", "time_slice")
EDGE_TYPES = (
    "transaction-card_holder",
    "transaction-merchant",
    "transaction-time_slice",
)


@dataclass(frozen=True)
class MetaPath:
    """A typed transaction-entity-transaction chain."""

    name: str
    node_chain: tuple[str, str, str]
    edge_chain: tuple[str, str]

    def bridge_type(self) -> str:
        return self.node_chain[1]


TCT = MetaPath(
    "TCT",
    ("transaction", "card_holder", "transaction"),
    ("transaction-card_holder", "transaction-card_holder"),
)
TMT = MetaPath(
    "TMT",
    ("transaction", "merchant", "transaction"),
    ("transaction-merchant", "transaction-merchant"),
)
TST = MetaPath(
    "TST",
    ("transaction", "time_slice", "transaction"),
    ("transaction-time_slice", "transaction-time_slice"),
)

DEFAULT_METAPATHS = (TCT, TMT, TST)


@dataclass
class ReplayTransaction:
    """A transaction carried outside its original dataset: explicit features
    plus the entity ids needed to graft it into another graph."""

    txn_id: str
    features: np.ndarray
    card_holder_id: str
    merchant_id: str
    time_slice: int
    label: int


class TradeGraph:
    """Immutable-by-convention typed graph over one region's transactions."""

    def __init__(
        self,
        txn_ids: list[str],
        features: np.ndarray,
        labels: np.ndarray,
        card_holder_ids: list[str],
        merchant_ids: list[str],
        txn_card_holder: np.ndarray,
        txn_merchant: np.ndarray,
        txn_time_slice: np.ndarray,
    ):
        self.txn_ids = list(txn_ids)
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.card_holder_ids = list(card_holder_ids)
        self.merchant_ids = list(merchant_ids)
        self.txn_card_holder = np.asarray(txn_card_holder, dtype=np.int64)
        self.txn_merchant = np.asarray(txn_merchant, dtype=np.int64)
        self.txn_time_slice = np.asarray(txn_time_slice, dtype=np.int64)
        n = len(self.txn_ids)
        if not (
            self.features.shape[0]
            == self.labels.shape[0]
            == self.txn_card_holder.shape[0]
            == self.txn_merchant.shape[0]
            == self.txn_time_slice.shape[0]
            == n
        ):
            raise DimensionError("transaction-aligned arrays disagree in length")

    @property
    def n_transactions(self) -> int:
        return len(self.txn_ids)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def time_slice_nodes(self) -> list[int]:
        return sorted(set(int(s) for s in self.txn_time_slice))

    def n_edges(self) -> int:
        return 3 * self.n_transactions

    def entity_index(self, node_type: str) -> np.ndarray:
        """Per-transaction entity node index for the given bridge type."""
        if node_type == "card_holder":
            return self.txn_card_holder
        if node_type == "merchant":
            return self.txn_merchant
        if node_type == "time_slice":
            return self.txn_time_slice
        raise ConfigError(f"unknown bridge node type {node_type!r}")


def build_trade_graph(ds: Dataset) -> TradeGraph:
    """One transaction node per record; entity nodes deduplicated in
    first-appearance order; time slice index is the record's hour."""
    if len(ds) == 0:
        raise ConfigError("cannot build a graph from an empty dataset")
    holders: dict[str, int] = {}
    merchants: dict[str, int] = {}
    txn_holder = np.empty(len(ds), dtype=np.int64)
    txn_merchant = np.empty(len(ds), dtype=np.int64)
    txn_slice = np.empty(len(ds), dtype=np.int64)
    for i, rec in enumerate(ds.records):
        txn_holder[i] = holders.setdefault(rec.card_holder_id, len(holders))
        txn_merchant[i] = merchants.setdefault(rec.merchant_id, len(merchants))
        txn_slice[i] = rec.hour_slice()
    return TradeGraph(
        txn_ids=[r.txn_id for r in ds.records],
        features=ds.feature_matrix(),
        labels=ds.labels(),
        card_holder_ids=list(holders),
        merchant_ids=list(merchants),
        txn_card_holder=txn_holder,
        txn_merchant=txn_merchant,
        txn_time_slice=txn_slice,
    )


class MetaPathAdjacency:
    """Per-transaction neighbor lists for one meta-path.

    Neighbor lists are sorted, include the node itself, and are also held in
    flattened form (flat_dst + offsets) for vectorized aggregation. When the
    lists form a partition into cliques (always the case for extracted
    two-hop paths), `groups` holds the sorted member array of each clique and
    fast group-wise kernels apply.
    """

    def __init__(
        self,
        spec: MetaPath,
        neighbors: list[np.ndarray],
        groups: list[np.ndarray] | None = None,
        detect_groups: bool = True,
    ):
        self.spec = spec
        self.neighbors = [np.asarray(a, dtype=np.int64) for a in neighbors]
        self.n_nodes = len(self.neighbors)
        counts = np.array([a.size for a in self.neighbors], dtype=np.int64)
        if self.n_nodes and counts.min() == 0:
            raise ConfigError("every node needs at least one neighbor (self loop)")
        self.counts = counts
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.flat_dst = (
            np.concatenate(self.neighbors) if self.n_nodes else np.empty(0, dtype=np.int64)
        )
        self.flat_src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), counts)
        if groups is not None:
            self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        elif detect_groups:
            self.groups = self._detect_cliques()
        else:
            self.groups = None
        # flat alpha positions of each clique's row-major coefficient block
        self.group_pos = None
        if self.groups is not None:
            self.group_pos = [
                (self.offsets[g][:, None] + np.arange(g.size)[None, :]).ravel()
                for g in self.groups
            ]

    @property
    def n_edges(self) -> int:
        return int(self.flat_dst.size)

    def _detect_cliques(self) -> list[np.ndarray] | None:
        seen = np.zeros(self.n_nodes, dtype=bool)
        groups = []
        for i in range(self.n_nodes):
            if seen[i]:
                continue
            group = self.neighbors[i]
            if i not in group:
                return None
            for j in group:
                if seen[j] or not np.array_equal(self.neighbors[j], group):
                    return None
                seen[j] = True
            groups.append(group)
        return groups

    def validate(self) -> None:
        """Check self-membership and symmetry; raises on violation."""
        neighbor_sets = [set(a.tolist()) for a in self.neighbors]
        for i, s in enumerate(neighbor_sets):
            if i not in s:
                raise ConfigError(f"node {i} missing from its own neighbor set")
            for j in s:
                if i not in neighbor_sets[j]:
                    raise ConfigError(f"adjacency asymmetric between {i} and {j}")


def extract_metapath_neighbors(g: TradeGraph, spec: MetaPath) -> MetaPathAdjacency:
    """Group transactions by the shared bridge entity of the meta-path.

    N_i is the sorted set of transactions sharing node i's bridge entity,
    which always contains i itself.
    """
    if spec.node_chain[0] != "transaction" or spec.node_chain[2] != "transaction":
        raise ConfigError(f"meta-path {spec.name!r} must start and end at transactions")
    entity = g.entity_index(spec.bridge_type())
    order = np.argsort(entity, kind="stable")
    sorted_entity = entity[order]
    boundaries = np.flatnonzero(np.diff(sorted_entity)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [entity.size]])
    groups = [np.sort(order[a:b]) for a, b in zip(starts, ends)]
    neighbors: list[np.ndarray] = [None] * g.n_transactions  # type: ignore[list-item]
    for group in groups:
        for i in group:
            neighbors[i] = group
    return MetaPathAdjacency(spec, neighbors, groups=groups)


def merge_replay_into_graph(
    g: TradeGraph, replay: list[ReplayTransaction]
) -> TradeGraph:
    """Append replayed transactions to a graph, reusing entity nodes by id.

    Existing node indices are unchanged; new entity nodes go at the end.
    """
    if not replay:
        return TradeGraph(
            g.txn_ids,
            g.features.copy(),
            g.labels.copy(),
            g.card_holder_ids,
            g.merchant_ids,
            g.txn_card_holder.copy(),
            g.txn_merchant.copy(),
            g.txn_time_slice.copy(),
        )
    d = g.feature_dim
    for item in replay:
        if np.asarray(item.features).shape != (d,):
            raise DimensionError(
                f"replay features for {item.txn_id!r} must have width {d}, "
                f"got {np.asarray(item.features).shape}"
            )
    known = set(g.txn_ids)
    holders = {cid: k for k, cid in enumerate(g.card_holder_ids)}
    merchants = {mid: k for k, mid in enumerate(g.merchant_ids)}
    txn_ids = list(g.txn_ids)
    new_feats, new_labels, new_h, new_m, new_s = [], [], [], [], []
    for item in replay:
        if item.txn_id in known:
            raise DuplicateIdError(f"replayed txn_id {item.txn_id!r} already in graph")
        known.add(item.txn_id)
        txn_ids.append(item.txn_id)
        new_feats.append(np.asarray(item.features, dtype=np.float64))
        new_labels.append(int(item.label))
        new_h.append(holders.setdefault(item.card_holder_id, len(holders)))
        new_m.append(merchants.setdefault(item.merchant_id, len(merchants)))
        new_s.append(int(item.time_slice))
    return TradeGraph(
        txn_ids=txn_ids,
        features=np.vstack([g.features, np.stack(new_feats)]),
        labels=np.concatenate([g.labels, np.array(new_labels, dtype=np.int64)]),
        card_holder_ids=list(holders),
        merchant_ids=list(merchants),
        txn_card_holder=np.concatenate([g.txn_card_holder, np.array(new_h, dtype=np.int64)]),
        txn_merchant=np.concatenate([g.txn_merchant, np.array(new_m, dtype=np.int64)]),
        txn_time_slice=np.concatenate([g.txn_time_slice, np.array(new_s, dtype=np.int64)]),
    )


def save_trade_graph(g: TradeGraph, directory) -> None:
    """Serialize a graph to CSV files; floats round-trip exactly via repr."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def _write(name, header, rows):
        with open(directory / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    _write("nodes_transaction.csv", ["index", "txn_id"], enumerate(g.txn_ids))
    _write("nodes_card_holder.csv", ["index", "card_holder_id"], enumerate(g.card_holder_ids))
    _write("nodes_merchant.csv", ["index", "merchant_id"], enumerate(g.merchant_ids))
    _write("nodes_time_slice.csv", ["hour"], [[h] for h in g.time_slice_nodes()])
    _write(
        "edges_transaction_card_holder.csv",
        ["txn_index", "card_holder_index"],
        enumerate(g.txn_card_holder.tolist()),
    )
    _write(
        "edges_transaction_merchant.csv",
        ["txn_index", "merchant_index"],
        enumerate(g.txn_merchant.tolist()),
    )
    _write(
        "edges_transaction_time_slice.csv",
        ["txn_index", "hour"],
        enumerate(g.txn_time_slice.tolist()),
    )
    _write(
        "features.csv",
        [f"f{j}" for j in range(g.feature_dim)],
        ([repr(x) for x in row] for row in g.features.tolist()),
    )
    _write("labels.csv", ["label"], [[int(y)] for y in g.labels])


def load_trade_graph(directory) -> TradeGraph:
    directory = Path(directory)

    def _read(name):
        with open(directory / name, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            return list(reader)

    txn_ids = [row[1] for row in _read("nodes_transaction.csv")]
    holders = [row[1] for row in _read("nodes_card_holder.csv")]
    merchants = [row[1] for row in _read("nodes_merchant.csv")]
    feats = np.array(
        [[float(x) for x in row] for row in _read("features.csv")], dtype=np.float64
    )
    labels = np.array([int(row[0]) for row in _read("labels.csv")], dtype=np.int64)
    txn_h = np.array(
        [int(row[1]) for row in _read("edges_transaction_card_holder.csv")], dtype=np.int64
    )
    txn_m = np.array(
        [int(row[1]) for row in _read("edges_transaction_merchant.csv")], dtype=np.int64
    )
    txn_s = np.array(
        [int(row[1]) for row in _read("edges_transaction_time_slice.csv")], dtype=np.int64
    )
    if feats.size == 0:
        feats = feats.reshape(len(txn_ids), 0)
    return TradeGraph(txn_ids, feats, labels, holders, merchants, txn_h, txn_m, txn_s)
