"""Scratch: single-region convergence reliability across seeds and lr."""
import numpy as np

from fraudgraph.data import SyntheticConfig, generate_synthetic
from fraudgraph.training import TrainConfig, train_single_region

for lr in (0.05, 0.02, 0.01):
    for patience, epochs in ((10, 60), (20, 100)):
        aucs, recs = [], []
        for seed in range(100, 108):
            ds = generate_synthetic(SyntheticConfig(
                n_regions=1, txns_per_region=1500, n_card_holders=80, n_merchants=200,
                fraud_rate=0.12, region_shift_strength=1.0, seed=seed,
            ))[0]
            cfg = TrainConfig(
                seed=seed, learning_rate=lr, max_epochs=epochs, patience=patience,
                d_hidden=16, n_heads=2, d_semantic=16,
            )
            m, _ = train_single_region(ds, cfg)
            aucs.append(m["auc"]); recs.append(m["recall"])
        print(
            f"lr={lr} patience={patience} epochs={epochs}: "
            f"auc min={min(aucs):.3f} mean={np.mean(aucs):.3f} | recall min={min(recs):.3f} mean={np.mean(recs):.3f}"
        )
