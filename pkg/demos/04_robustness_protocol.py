"""
The robustness protocol end to end
==================================

One sweep walks the hierarchical grid (family -> trial -> feature ->
error kind -> error rate), scoring every corrupted configuration against
clean ground truth, full-series and on peak events only. Aggregations
condense the records into a Computation Complexity Index and a
Robustness Index per model family.
"""

import numpy as np

from sewerbench import (
    ChronoSplit,
    ForecastTask,
    SynthConfig,
    TrainConfig,
    build_windows,
    consistency,
    fit,
    generate,
    measure_complexity,
    robustness_sweep,
    split,
    tradeoff_indices,
)

frame = generate(SynthConfig(length=2000, seed=5, n_aux_channels=1))
train, val, test = split(frame, ChronoSplit(frame.time_at(1200), frame.time_at(1600)))
task = ForecastTask(input_len=48, horizon=12)
train_w = build_windows(train, task)
val_w = build_windows(val, task)

# Three trials per family keep the demo quick (a full study would train
# ~100); linear fits are seed-independent, so their spread collapses to zero.
families = ("persistence", "linear_direct", "linear_recursive")
handles = [fit(f, train_w, val_w, TrainConfig(seed=s)) for f in families for s in range(3)]

records = robustness_sweep(
    handles,
    test,
    task,
    features=["rain", "level"],
    kinds=["outlier", "missing", "clip"],
    rates=[0.1, 0.3, 0.5],
    seed_base=0,
)
perturbed = [r for r in records if r.feature is not None]
print(f"{len(records)} records ({len(perturbed)} grid cells + {len(records) - len(perturbed)} clean baselines)")

print("\nclean consistency (median MSE, IQR over trials):")
for model, (median, iqr) in consistency(records).items():
    print(f"  {model:<17} median {median:8.3f}  iqr {iqr:.3e}")

print("\nmean |MSE increase| by error kind:")
clean = {(r.model_type, r.seed): r.mse for r in records if r.feature is None}
for kind in ("outlier", "missing", "clip"):
    print(f"  {kind}:")
    for family in families:
        cells = [abs(r.mse - clean[(r.model_type, r.seed)])
                 for r in perturbed if r.model_type == family and r.error_kind == kind]
        print(f"    {family:<17} {np.mean(cells):10.3f}")

# Complexity measurements feed the CCI; sweep records feed the RI.
complexity = {}
for family in families:
    handle = next(h for h in handles if h.family == family)
    complexity[family] = measure_complexity(handle, val_w, repeats=5)

print("\ntrade-off indices (lower RI = more robust, lower CCI = lighter):")
for model, idx in tradeoff_indices(records, complexity).items():
    print(f"  {model:<17} CCI {idx.cci:.3f}  RI {idx.ri:.3f}")
