"""Cross-regional fraud detection on heterogeneous transaction graphs."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    RegionSpec,
    SyntheticConfig,
    TransactionRecord,
    emit_temporal_profile,
    generate_synthetic,
    parse_transactions_csv,
    partition_by_region,
    split_train_val_test,
)
from .graph import (
    DEFAULT_METAPATHS,
    MetaPath,
    MetaPathAdjacency,
    ReplayTransaction,
    TradeGraph,
    build_trade_graph,
    extract_metapath_neighbors,
    merge_replay_into_graph,
)
from .model import (
    ForwardTrace,
    Hyperparams,
    ModelParams,
    classify,
    compute_gradients,
    cross_entropy_loss,
    forward,
    init_params,
    node_level_attention,
    project_features,
    semantic_attention,
)
from .continual import (
    FisherState,
    PrototypeSet,
    ReplayBuffer,
    compute_fisher,
    generate_prototypes,
    sample_replay_buffer,
    smoothing_loss,
    total_objective,
)
from .metrics import auc_score, evaluate
from .training import (
    OptimizerState,
    SequenceResult,
    TrainConfig,
    emit_forgetting_curves,
    optimizer_step,
    run_sequence,
    train_region,
    train_single_region,
)
