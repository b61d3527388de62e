"""Scratch: end-to-end sequence run, all variants, timing + forgetting direction."""
import time
import numpy as np

from fraudgraph.data import SyntheticConfig, generate_synthetic
from fraudgraph.training import TrainConfig, run_sequence

cfg_data = SyntheticConfig(
    n_regions=3, txns_per_region=2000, n_card_holders=80, n_merchants=200,
    fraud_rate=0.12, region_shift_strength=1.0, seed=5,
)
regions = generate_synthetic(cfg_data)
print("fraud rates:", [ds.labels().mean() for ds in regions])

for variant in ("naive", "full", "no_rps", "no_pkr"):
    cfg = TrainConfig(
        variant=variant, seed=5, max_epochs=60, patience=10,
        d_hidden=16, n_heads=2, d_semantic=16, fisher_max_samples=256,
    )
    t0 = time.time()
    res = run_sequence(regions, cfg)
    el = time.time() - t0
    aucs = [m["auc"] for m in res.per_region_final]
    r0_curve = [a for (t, r, a) in res.curve_rows if r == 0]
    print(
        f"{variant:7s} avg_auc={res.averages['auc']:.4f} per-region={['%.3f' % a for a in aucs]} "
        f"region0 curve={['%.3f' % a for a in r0_curve]} epochs={res.epochs_per_region} {el:.1f}s"
    )
