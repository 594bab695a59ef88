"""
Baseline forecasters and the global/local split
===============================================

The built-in families span the structural axis that matters for
robustness work: direct multi-horizon models emit the whole forecast at
once, recursive one-step models feed their own predictions back. Global
mode consumes every channel plus the rain forecast; local mode sees only
the target history plus a shifted-target placeholder.
"""

from sewerbench import (
    ChronoSplit,
    ForecastTask,
    SynthConfig,
    TrainConfig,
    build_windows,
    fit,
    generate,
    make_placeholder_future,
    measure_complexity,
    mse,
    predict,
    split,
)
from sewerbench.forecast import from_bytes, to_bytes

frame = generate(SynthConfig(length=3000, seed=1))
frame = make_placeholder_future(frame, 12)  # enables local mode
train, val, test = split(frame, ChronoSplit(frame.time_at(1800), frame.time_at(2400)))
print(f"split sizes: train {train.length}, val {val.length}, test {test.length}")

for mode in ("global", "local"):
    task = ForecastTask(input_len=72, horizon=12, mode=mode)
    train_w = build_windows(train, task)
    val_w = build_windows(val, task)
    test_w = build_windows(test, task)
    print(f"\n{mode} mode: {train_w.n_windows} training windows, "
          f"{len(train_w.layout.input_channels)} input channels")
    for family in ("persistence", "seasonal_naive", "linear_direct", "linear_recursive", "mlp_direct"):
        cfg = TrainConfig(seed=0, max_epochs=30, hidden=32)
        handle = fit(family, train_w, val_w, cfg)
        test_mse = mse(predict(handle, test_w), test_w.targets)
        seconds, size = measure_complexity(handle, val_w, repeats=5)
        print(f"  {family:<17} test MSE {test_mse:9.3f}   "
              f"{handle.param_count:>5} params, {size:>7} bytes, {1e3 * seconds:6.2f} ms/probe")

# Handles serialize to a versioned byte-stable blob; a reloaded model
# predicts bit-identically.
task = ForecastTask(mode="global")
train_w = build_windows(train, task)
test_w = build_windows(test, task)
handle = fit("linear_direct", train_w, None, TrainConfig(seed=0))
clone = from_bytes(to_bytes(handle))
assert (predict(clone, test_w) == predict(handle, test_w)).all()
print("\nserialization round trip: predictions bit-identical")
