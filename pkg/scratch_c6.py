"""Scratch: criterion-6 scale probe (10k txns, 60% train), timing + metrics."""
import sys
import time
import numpy as np

from fraudgraph.data import SyntheticConfig, generate_synthetic
from fraudgraph.training import TrainConfig, train_single_region

lr = float(sys.argv[1]) if len(sys.argv) > 1 else 0.05
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 200
patience = int(sys.argv[3]) if len(sys.argv) > 3 else 30

aucs, recs, times = [], [], []
for seed in range(200, 205):
    ds = generate_synthetic(SyntheticConfig(
        n_regions=1, txns_per_region=10000, n_card_holders=120, n_merchants=400,
        fraud_rate=0.1, region_shift_strength=1.0, seed=seed,
    ))[0]
    cfg = TrainConfig(
        seed=seed, learning_rate=lr, max_epochs=epochs, patience=patience,
        d_hidden=16, n_heads=1, d_semantic=16,
    )
    t0 = time.time()
    m, _ = train_single_region(ds, cfg)
    dt = time.time() - t0
    aucs.append(m["auc"]); recs.append(m["recall"]); times.append(dt)
    print(f"seed {seed}: auc={m['auc']:.4f} recall={m['recall']:.4f} f1={m['f1']:.4f} epochs={m['epochs']} {dt:.1f}s")
print(f"mean auc={np.mean(aucs):.4f} mean recall={np.mean(recs):.4f} total={sum(times):.0f}s")
