"""Scratch: naive monotonicity per seed, no-drift control, lambda sweep."""
import numpy as np

from fraudgraph.data import SyntheticConfig, generate_synthetic
from fraudgraph.training import TrainConfig, run_sequence


def data_cfg(seed, strength):
    return SyntheticConfig(
        n_regions=3, txns_per_region=1500, n_card_holders=80, n_merchants=200,
        fraud_rate=0.12, region_shift_strength=strength, seed=seed,
    )


def train_cfg(seed, variant, lam=1.5):
    return TrainConfig(
        variant=variant, seed=seed, max_epochs=60, patience=10,
        d_hidden=16, n_heads=2, d_semantic=16, fisher_max_samples=192,
        smoothing_lambda=lam,
    )


print("== naive region-0 curves (drift 1.0) ==")
mono = 0
for seed in range(100, 105):
    res = run_sequence(generate_synthetic(data_cfg(seed, 1.0)), train_cfg(seed, "naive"))
    curve = [a for (t, r, a) in res.curve_rows if r == 0]
    dec = all(curve[i] > curve[i + 1] for i in range(len(curve) - 1))
    mono += dec
    print(f"  seed {seed}: {['%.3f' % a for a in curve]} decreasing={dec}")
print("monotone in", mono, "of 5 seeds")

print("== no-drift control (strength 0, naive) ==")
drops = []
for seed in range(100, 105):
    res = run_sequence(generate_synthetic(data_cfg(seed, 0.0)), train_cfg(seed, "naive"))
    curve = [a for (t, r, a) in res.curve_rows if r == 0]
    drops.append(curve[0] - curve[-1])
    print(f"  seed {seed}: {['%.3f' % a for a in curve]} drop={drops[-1]:.4f}")
print("mean drop:", float(np.mean(drops)))

print("== lambda=5 sweep (drift 1.0) ==")
for variant in ("no_pkr", "full"):
    aucs = []
    for seed in range(100, 105):
        res = run_sequence(
            generate_synthetic(data_cfg(seed, 1.0)), train_cfg(seed, variant, lam=5.0)
        )
        aucs.append(res.averages["auc"])
    print(f"  {variant} lam=5: mean={float(np.mean(aucs)):.4f}")
