"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints an `ACCEPTANCE <name>: PASS|FAIL` line (visible with
`pytest -s tests/test_acceptance.py`) and then asserts, so a red run
still shows which criterion fell over.
"""

import time

import numpy as np
import pytest

from sewerbench import mlp
from sewerbench.corrupt import ErrorSpec, FenceStats, fence_stats, mask_runs, perturb, target_count
from sewerbench.evaluate import cci, mse_increases, peak_mask, ri, robustness_sweep, write_records
from sewerbench.forecast import (
    ForecastTask,
    Layout,
    TrainConfig,
    WindowSet,
    build_windows,
    fit,
    predict,
)
from sewerbench.frame import ChannelSpec, ChronoSplit, TimeSeriesFrame, make_placeholder_future, split
from sewerbench.synth import SynthConfig, canonical_config, generate

from test_corrupt import frame_of, sort_oracle_quantile


def announce(name: str, passed: bool, detail: str = "") -> bool:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    return passed


def split_canonical(frame):
    return split(frame, ChronoSplit(frame.time_at(2400), frame.time_at(3200)))


class TestErrorModelSuite:
    def test_error_models_on_random_series(self):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        n = 5000
        rates = (0.1, 0.2, 0.3, 0.4, 0.5)
        kinds = ("outlier", "missing", "clip")
        ok = True
        for series_idx in range(50):
            base = rng.normal(loc=rng.uniform(-5, 5), scale=rng.uniform(0.5, 3.0), size=n)
            frame = frame_of(a=base, b=rng.normal(size=n))
            stats = fence_stats(frame, "a")
            for kind in kinds:
                for rate in rates:
                    spec = ErrorSpec(kind, rate=rate, seed=series_idx * 100 + int(rate * 10))
                    out, mask = perturb(frame, "a", spec)
                    ok &= mask.indices.size == target_count(rate, n)
                    runs = mask_runs(mask.indices)
                    ok &= sum(length for _, length in runs) == mask.indices.size
                    if mask.indices.size >= 100:
                        ok &= float(np.mean([l for _, l in runs])) >= 4.0
                    untouched = np.setdiff1d(np.arange(n), mask.indices)
                    ok &= np.array_equal(out.column("a")[untouched], base[untouched])
                    ok &= np.array_equal(out.column("b"), frame.column("b"))
                    if kind == "clip":
                        ok &= mask.effective_rate(n) <= rate + 1e-12
            # Outlier guarantee at beta=0, alpha=1.1: 100% outside original fences.
            guarantee_spec = ErrorSpec("outlier", rate=0.3, alpha=1.1, beta=0.0, seed=series_idx)
            out, mask = perturb(frame, "a", guarantee_spec)
            ok &= bool(np.all(stats.is_outlier(out.column("a")[mask.indices])))
        elapsed = time.perf_counter() - start
        ok &= elapsed < 60.0
        assert announce("error-model-suite", ok, f"{elapsed:.1f}s for 50 series x 15 cells")


class TestQuantileOracle:
    def test_fences_match_sort_oracle_on_1000_series(self):
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(4, 400))
            x = rng.normal(size=n) * rng.uniform(0.1, 10)
            stats = FenceStats.from_values(x)
            q1 = sort_oracle_quantile(x, 0.25)
            q3 = sort_oracle_quantile(x, 0.75)
            mean = float(np.sum(x) / n)
            worst = max(
                worst,
                abs(stats.q1 - q1),
                abs(stats.q3 - q3),
                abs(stats.iqr - (q3 - q1)),
                abs(stats.mean - mean),
                abs(stats.lower_fence - (q1 - 1.5 * (q3 - q1))),
                abs(stats.upper_fence - (q3 + 1.5 * (q3 - q1))),
                abs(sort_oracle_quantile(x, 0.2) - np.quantile(x, 0.2)),
                abs(sort_oracle_quantile(x, 0.8) - np.quantile(x, 0.8)),
            )
        assert announce("quantile-oracle-equivalence", worst <= 1e-12, f"max abs err {worst:.2e}")


class TestTrainerChecks:
    def test_gradient_recovery_and_early_stopping(self):
        # (a) analytic gradient vs central finite differences, 10-parameter MLP.
        rng = np.random.default_rng(5)
        x = rng.normal(size=(32, 1))
        y = rng.normal(size=(32, 2))
        params = mlp.init_params(1, 2, 2, seed=1)
        assert sum(v.size for v in params.values()) == 10
        _, grads = mlp.loss_and_grad(params, x, y)
        eps = 1e-6
        worst_rel = 0.0
        for key in params:
            flat = params[key].ravel()
            for j in range(flat.size):
                probe = {k: v.copy() for k, v in params.items()}
                probe[key].ravel()[j] += eps
                up, _ = mlp.loss_and_grad(probe, x, y)
                probe[key].ravel()[j] -= 2 * eps
                down, _ = mlp.loss_and_grad(probe, x, y)
                numeric = (up - down) / (2 * eps)
                analytic = grads[key].ravel()[j]
                worst_rel = max(worst_rel, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8))
        grad_ok = worst_rel <= 1e-4

        # (b) linear_direct recovers a noiseless linear generator.
        w, length, horizon = 400, 6, 3
        inputs = rng.normal(size=(w, length, 2))
        future = rng.normal(size=(w, horizon, 1))
        layout = Layout(("a", "lvl"), ("f",), "lvl", length, horizon)
        flat = np.concatenate([inputs.reshape(w, -1), future.reshape(w, -1)], axis=1)
        coef = rng.normal(size=(flat.shape[1], horizon))
        targets = flat @ coef - 1.25
        windows = WindowSet(inputs, future, targets, np.arange(length - 1, length - 1 + w), layout)
        handle = fit("linear_direct", windows, None, TrainConfig(ridge_lambda=0.0))
        train_mse = float(np.mean((predict(handle, windows) - targets) ** 2))
        recovery_ok = train_mse < 1e-10

        # (c) early stopping restores the best-validation epoch: a small noisy
        # regression problem that overfits, so the best epoch is interior.
        rng2 = np.random.default_rng(42)
        truth = lambda x: np.column_stack([np.sin(2 * x[:, 0]), x[:, 0] * x[:, 1]])
        x_train = rng2.normal(size=(40, 2))
        y_train = truth(x_train) + 0.3 * rng2.normal(size=(40, 2))
        x_val = rng2.normal(size=(200, 2))
        y_val = truth(x_val) + 0.3 * rng2.normal(size=(200, 2))
        weights, history = mlp.train_mlp(
            x_train, y_train, x_val, y_val, hidden=32, seed=0, lr=3e-2,
            max_epochs=200, patience=10, batch_size=8,
        )
        returned = float(np.mean((mlp.forward(weights, x_val) - y_val) ** 2))
        stopping_ok = (
            abs(returned - min(history.val_mse)) <= 1e-15
            and history.best_epoch == int(np.argmin(history.val_mse))
            and 0 < history.best_epoch < len(history.val_mse) - 1  # interior best
            and len(history.val_mse) < 200                          # actually stopped early
            and all(v >= returned for v in history.val_mse[history.best_epoch + 1 :])
        )

        assert announce(
            "trainer-checks",
            grad_ok and recovery_ok and stopping_ok,
            f"grad rel {worst_rel:.2e}, recovery mse {train_mse:.2e}, best epoch {history.best_epoch}",
        )


class TestIndexArithmetic:
    def test_cci_ri_closed_forms(self):
        times = {"a": 0.2, "b": 0.5, "c": 0.05}
        sizes = {"a": 1000.0, "b": 4000.0, "c": 250.0}
        table = {m: (times[m], sizes[m]) for m in times}
        values = cci(table)
        worst = max(
            abs(values[m] - 0.5 * (times[m] / 0.5 + sizes[m] / 4000.0)) for m in times
        )
        closed_ok = worst <= 1e-12

        ri_table = {"a": (0.3, 5.0, 1.2), "b": (0.1, 2.0, 0.4), "c": (0.6, 9.0, 3.0)}
        ri_values = ri(ri_table)
        worst_ri = max(
            abs(ri_values[m] - (x / 0.6 + y / 9.0 + z / 3.0) / 3.0)
            for m, (x, y, z) in ri_table.items()
        )
        ri_ok = worst_ri <= 1e-12

        rescaled_t = cci({m: (10.0 * t, s) for m, (t, s) in table.items()})
        rescaled_s = cci({m: (t, 3.0 * s) for m, (t, s) in table.items()})
        invariance = max(
            max(abs(rescaled_t[m] - values[m]) for m in values),
            max(abs(rescaled_s[m] - values[m]) for m in values),
        )
        invariance_ok = invariance <= 1e-12

        single_ok = cci({"solo": (0.3, 10.0)})["solo"] == 1.0

        assert announce(
            "index-arithmetic",
            closed_ok and ri_ok and invariance_ok and single_ok,
            f"cci err {worst:.2e}, ri err {worst_ri:.2e}, rescale err {invariance:.2e}",
        )


class TestQualitativeFindingRobustness:
    def test_recursive_less_robust_than_direct(self):
        """Target-history outliers hurt the recursive family more than the direct one.

        Both families run in local mode so they consume identical inputs
        (target history plus placeholder) and recursion is the only
        structural difference.
        """
        start = time.perf_counter()
        task = ForecastTask(mode="local")
        wins = 0
        per_rate: dict[float, list[tuple[float, float]]] = {0.2: [], 0.3: [], 0.4: [], 0.5: []}
        for seed in range(10):
            frame = make_placeholder_future(generate(canonical_config(seed=seed)), task.horizon)
            train, _, test = split_canonical(frame)
            windows = build_windows(train, task)
            cfg = TrainConfig(seed=seed)
            handles = [
                fit("linear_direct", windows, None, cfg),
                fit("linear_recursive", windows, None, cfg),
            ]
            records = robustness_sweep(
                handles, test, task, ["level"], ["outlier"], [0.2, 0.3, 0.4, 0.5], seed_base=seed
            )
            increases = mse_increases(records)
            direct = float(np.mean(increases["linear_direct"]))
            recursive = float(np.mean(increases["linear_recursive"]))
            wins += recursive > direct
            clean = {(r.model_type, r.seed): r.mse for r in records if r.feature is None}
            for r in records:
                if r.feature is not None:
                    per_rate[r.error_rate].append(
                        (abs(r.mse - clean[(r.model_type, r.seed)]), r.model_type == "linear_recursive")
                    )
        elapsed = time.perf_counter() - start
        # Aggregated across seeds, the ordering holds at every rate >= 0.2.
        rate_ok = all(
            np.mean([v for v, rec in cells if rec]) > np.mean([v for v, rec in cells if not rec])
            for cells in per_rate.values()
        )
        ok = wins >= 9 and rate_ok and elapsed < 600.0
        assert announce(
            "qualitative-recursive-vs-direct",
            ok,
            f"{wins}/10 seeds, per-rate ordering {rate_ok}, {elapsed:.0f}s",
        )


class TestQualitativeFindingPeaks:
    def test_global_beats_local_on_peaks(self):
        start = time.perf_counter()
        wins = 0
        peak_gaps, full_gaps = [], []
        for seed in range(10):
            frame = generate(canonical_config(seed=seed, forecast_noise_sd=0.0))
            frame = make_placeholder_future(frame, 12)
            train, _, test = split_canonical(frame)
            results = {}
            for mode in ("global", "local"):
                task = ForecastTask(mode=mode)
                windows = build_windows(train, task)
                handle = fit("linear_direct", windows, None, TrainConfig(seed=seed))
                test_windows = build_windows(test, task)
                pred = predict(handle, test_windows)
                mask = peak_mask(test.column("level"))
                from sewerbench.evaluate import mse

                results[mode] = (
                    mse(pred, test_windows.targets),
                    mse(pred, test_windows.targets, mask, test_windows.origins),
                )
            wins += results["global"][1] < results["local"][1]
            peak_gaps.append(results["local"][1] - results["global"][1])
            full_gaps.append(results["local"][0] - results["global"][0])
        gap_ok = float(np.mean(peak_gaps)) > float(np.mean(full_gaps))
        elapsed = time.perf_counter() - start
        ok = wins >= 9 and gap_ok
        assert announce(
            "qualitative-global-vs-local-peaks",
            ok,
            f"{wins}/10 seeds, peak gap {np.mean(peak_gaps):.1f} vs full gap {np.mean(full_gaps):.1f}, {elapsed:.0f}s",
        )


class TestSweepDeterminismAndCount:
    def test_two_runs_byte_identical_and_counted(self, tmp_path):
        frame = generate(SynthConfig(length=700, seed=42, n_aux_channels=1))
        task = ForecastTask(input_len=24, horizon=6)
        boundaries = ChronoSplit(frame.time_at(420), frame.time_at(560))
        train, _, test = split(frame, boundaries)
        windows = build_windows(train, task)
        handles = []
        for family in ("persistence", "linear_direct"):
            for seed in (0, 1):
                handles.append(fit(family, windows, None, TrainConfig(seed=seed)))
        features = ["rain", "level"]
        kinds = ["outlier", "missing", "clip"]
        rates = [0.1, 0.2, 0.3, 0.4, 0.5]
        meta = {"config_sha256": "acceptance", "seed_base": 0}

        records_a = robustness_sweep(handles, test, task, features, kinds, rates, seed_base=0, jobs=1)
        records_b = robustness_sweep(handles, test, task, features, kinds, rates, seed_base=0, jobs=4)
        path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_records(path_a, records_a, meta)
        write_records(path_b, records_b, meta)
        identical = path_a.read_bytes() == path_b.read_bytes()

        perturbed = [r for r in records_a if r.feature is not None]
        expected = 2 * 2 * len(features) * 3 * 5
        count_ok = len(perturbed) == expected
        failures = [r for r in records_a if r.error is not None]
        assert announce(
            "sweep-determinism-and-count",
            identical and count_ok and not failures,
            f"{len(perturbed)} grid records (expected {expected}), byte-identical {identical}",
        )


class TestPeakMaskCriterion:
    def test_fraction_and_spike_block(self):
        rng = np.random.default_rng(123)
        ok = True
        for trial in range(5):
            series = np.cumsum(rng.normal(size=3000))
            mask = peak_mask(series, window=48, top_fraction=0.2)
            n_valid = series.size - 1
            ok &= abs(int(mask.selected.sum()) - 0.2 * n_valid) <= 1.0

        spike = np.zeros(2000)
        spike[700] = 25.0
        mask = peak_mask(spike, window=48, top_fraction=0.2)
        selected = np.flatnonzero(mask.selected)
        contiguous = bool(np.all(np.diff(selected) == 1))
        around = selected.min() <= 700 <= selected.max()
        width_ok = 40 <= selected.size <= 56
        ok &= contiguous and around and width_ok
        assert announce(
            "peak-mask",
            ok,
            f"spike block width {selected.size}, contiguous {contiguous}",
        )
