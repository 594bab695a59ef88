"""Tests for the error models and clustered sampling."""

from datetime import datetime, timezone

import numpy as np
import pytest

from sewerbench.corrupt import (
    CorruptionError,
    ErrorMask,
    ErrorSpec,
    FenceStats,
    apply_clipping,
    apply_missing,
    apply_outliers,
    fence_stats,
    mask_runs,
    perturb,
    sample_clusters,
    target_count,
    write_mask_csv,
)
from sewerbench.frame import ChannelSpec, TimeSeriesFrame

T0 = datetime(2023, 1, 1, tzinfo=timezone.utc)


def frame_of(**columns) -> TimeSeriesFrame:
    specs = tuple(ChannelSpec(n) for n in columns)
    return TimeSeriesFrame(T0, 1.0, specs, np.column_stack(list(columns.values())))


def sort_oracle_quantile(values: np.ndarray, q: float) -> float:
    """Independent order-statistic oracle with linear interpolation."""
    x = np.sort(np.asarray(values, dtype=float))
    pos = q * (x.size - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    return float(x[lo] + (pos - lo) * (x[hi] - x[lo]))


class TestFenceStats:
    def test_eight_point_example(self):
        f = frame_of(a=np.arange(1.0, 9.0))
        stats = fence_stats(f, "a")
        assert stats.q1 == pytest.approx(2.75, abs=1e-12)
        assert stats.q3 == pytest.approx(6.25, abs=1e-12)
        assert stats.iqr == pytest.approx(3.5, abs=1e-12)
        assert stats.lower_fence == pytest.approx(-2.5, abs=1e-12)
        assert stats.upper_fence == pytest.approx(11.5, abs=1e-12)
        assert stats.mean == pytest.approx(4.5, abs=1e-12)

    def test_constant_series_degenerate_spread(self):
        stats = fence_stats(frame_of(a=[5.0, 5.0, 5.0, 5.0]), "a")
        assert stats.iqr == 0.0
        assert stats.lower_fence == 5.0
        assert stats.upper_fence == 5.0

    def test_uniform_samples_rarely_outside_fences(self):
        rng = np.random.default_rng(0)
        for n in (100, 10000):
            x = rng.uniform(size=n)
            stats = FenceStats.from_values(x)
            frac = np.mean(stats.is_outlier(x))
            assert frac <= (0.02 if n >= 10000 else 0.1)

    def test_ignores_missing_cells(self):
        f = frame_of(a=[1.0, np.nan, 2.0, 3.0, np.nan, 4.0])
        stats = fence_stats(f, "a")
        assert stats.mean == pytest.approx(2.5, abs=1e-12)

    def test_too_few_observations(self):
        with pytest.raises(CorruptionError, match="degenerate distribution"):
            fence_stats(frame_of(a=[1.0, 2.0, np.nan, np.nan]), "a")

    def test_matches_sort_oracle_on_random_series(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            x = rng.normal(size=int(rng.integers(5, 300)))
            stats = FenceStats.from_values(x)
            assert abs(stats.q1 - sort_oracle_quantile(x, 0.25)) <= 1e-12
            assert abs(stats.q3 - sort_oracle_quantile(x, 0.75)) <= 1e-12


class TestSampleClusters:
    def test_zero_rate_empty(self):
        assert sample_clusters(100, 0.0).size == 0

    def test_full_rate_single_run(self):
        idx = sample_clusters(100, 1.0)
        assert np.array_equal(idx, np.arange(100))
        assert len(mask_runs(idx)) == 1

    def test_count_and_run_decomposition(self):
        idx = sample_clusters(10000, 0.3, seed=123)
        assert idx.size == 3000
        runs = mask_runs(idx)
        assert sum(length for _, length in runs) == 3000
        # Clustered, not scattered: far fewer maximal runs than cells.
        assert len(runs) <= 3000 // 4

    def test_indices_sorted_unique_within_range(self):
        for seed in range(5):
            idx = sample_clusters(500, 0.4, cluster_mean_len=6, seed=seed)
            assert np.array_equal(idx, np.unique(idx))
            assert idx.min() >= 0 and idx.max() < 500

    def test_deterministic_per_seed(self):
        a = sample_clusters(1000, 0.25, seed=9)
        b = sample_clusters(1000, 0.25, seed=9)
        c = sample_clusters(1000, 0.25, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_unit_mean_degenerates_to_scatter(self):
        idx = sample_clusters(5000, 0.1, cluster_mean_len=1, seed=3)
        lengths = [length for _, length in mask_runs(idx)]
        assert np.mean(lengths) < 2.0

    def test_count_matches_rounding(self):
        for n, rate in [(10, 0.5), (1000, 0.123), (7, 0.9), (5000, 0.3)]:
            assert sample_clusters(n, rate, seed=1).size == target_count(rate, n)


class TestApplyOutliers:
    def test_closed_form_shift_below_mean(self):
        # x = mean - 1 with alpha=1, beta=0 moves to x - (mean - lower_fence).
        stats = FenceStats(q1=2.0, q3=8.0, iqr=6.0, mean=5.0, lower_fence=0.0, upper_fence=9.0)
        f = frame_of(a=[4.0, 4.0, 4.0, 4.0])
        spec = ErrorSpec("outlier", rate=1.0, alpha=1.0, beta=0.0, seed=1)
        out, mask = apply_outliers(f, "a", spec, stats)
        assert np.allclose(out.column("a"), -1.0)
        assert (-1.0) < stats.lower_fence

    def test_at_mean_uses_upper_branch(self):
        stats = FenceStats(q1=2.0, q3=8.0, iqr=6.0, mean=4.0, lower_fence=0.0, upper_fence=9.0)
        f = frame_of(a=[4.0, 4.0, 4.0, 4.0])
        spec = ErrorSpec("outlier", rate=1.0, alpha=1.0, beta=0.0, seed=1)
        out, _ = apply_outliers(f, "a", spec, stats)
        assert np.allclose(out.column("a"), 4.0 + (9.0 - 4.0))

    def test_zero_rate_identity(self):
        rng = np.random.default_rng(2)
        f = frame_of(a=rng.normal(size=50))
        out, mask = apply_outliers(f, "a", ErrorSpec("outlier", rate=0.0, seed=5))
        assert np.array_equal(out.values, f.values)
        assert mask.indices.size == 0

    def test_guarantee_outside_fences_when_beta_zero(self):
        rng = np.random.default_rng(3)
        for seed in range(10):
            f = frame_of(a=rng.normal(size=400))
            stats = fence_stats(f, "a")
            spec = ErrorSpec("outlier", rate=0.3, alpha=1.1, beta=0.0, seed=seed)
            out, mask = apply_outliers(f, "a", spec)
            perturbed = out.column("a")[mask.indices]
            assert np.all(stats.is_outlier(perturbed))

    def test_effective_equals_indices(self):
        f = frame_of(a=np.random.default_rng(1).normal(size=100))
        _, mask = apply_outliers(f, "a", ErrorSpec("outlier", rate=0.2, seed=7))
        assert np.array_equal(mask.indices, mask.effective_indices)

    def test_degenerate_iqr_rejected(self):
        f = frame_of(a=[5.0] * 20)
        with pytest.raises(CorruptionError, match="degenerate distribution"):
            apply_outliers(f, "a", ErrorSpec("outlier", rate=0.5, seed=1))


class TestApplyMissing:
    def test_full_rate_blanks_channel(self):
        f = frame_of(a=np.arange(10.0), b=np.arange(10.0))
        out, mask = apply_missing(f, "a", ErrorSpec("missing", rate=1.0, seed=1))
        assert np.isnan(out.column("a")).all()
        assert np.array_equal(out.column("b"), f.column("b"))

    def test_half_rate_counts_and_runs(self):
        f = frame_of(a=np.arange(10.0))
        out, mask = apply_missing(f, "a", ErrorSpec("missing", rate=0.5, cluster_mean_len=2, seed=4))
        assert np.isnan(out.column("a")).sum() == 5
        assert mask.indices.size == 5
        assert mask_runs(mask.indices)

    def test_other_cells_bit_identical(self):
        rng = np.random.default_rng(8)
        f = frame_of(a=rng.normal(size=200), b=rng.normal(size=200))
        out, mask = apply_missing(f, "a", ErrorSpec("missing", rate=0.3, seed=2))
        untouched = np.setdiff1d(np.arange(200), mask.indices)
        assert np.array_equal(out.column("a")[untouched], f.column("a")[untouched])
        assert np.array_equal(out.column("b"), f.column("b"))


class TestApplyClipping:
    def test_bounds_from_order_statistic_oracle(self):
        f = frame_of(a=np.arange(10.0))
        q_lo = sort_oracle_quantile(np.arange(10.0), 0.2)
        q_hi = sort_oracle_quantile(np.arange(10.0), 0.8)
        spec = ErrorSpec("clip", rate=1.0, q_lower=0.2, q_upper=0.8, seed=1)
        out, mask = apply_clipping(f, "a", spec)
        col = out.column("a")
        original = f.column("a")
        assert np.all(col[original < q_lo] == q_lo)
        assert np.all(col[original > q_hi] == q_hi)
        inside = (original >= q_lo) & (original <= q_hi)
        assert np.array_equal(col[inside], original[inside])
        assert set(mask.effective_indices.tolist()) == {0, 1, 8, 9}

    def test_constant_channel_effective_rate_zero(self):
        f = frame_of(a=[5.0] * 40)
        out, mask = apply_clipping(f, "a", ErrorSpec("clip", rate=0.8, seed=3))
        assert np.array_equal(out.values, f.values)
        assert mask.effective_indices.size == 0
        assert mask.indices.size == target_count(0.8, 40)

    def test_effective_rate_never_exceeds_requested(self):
        rng = np.random.default_rng(12)
        for seed in range(10):
            f = frame_of(a=rng.normal(size=300))
            rate = float(rng.uniform(0.1, 0.9))
            _, mask = apply_clipping(f, "a", ErrorSpec("clip", rate=rate, seed=seed))
            assert mask.effective_rate(300) <= rate + 1e-12

    def test_clipped_cells_sit_on_bounds(self):
        rng = np.random.default_rng(13)
        f = frame_of(a=rng.normal(size=500))
        finite = f.column("a")
        q_lo = sort_oracle_quantile(finite, 0.2)
        q_hi = sort_oracle_quantile(finite, 0.8)
        out, mask = apply_clipping(f, "a", ErrorSpec("clip", rate=0.5, seed=5))
        changed = out.column("a")[mask.effective_indices]
        assert np.all(np.isin(changed, [q_lo, q_hi]))


class TestPerturbDispatcher:
    def test_missing_dispatch_matches_direct_call(self):
        f = frame_of(a=np.arange(20.0))
        spec = ErrorSpec("missing", rate=0.4, seed=6)
        via_dispatch, m1 = perturb(f, "a", spec)
        direct, m2 = apply_missing(f, "a", spec)
        assert np.array_equal(via_dispatch.values, direct.values, equal_nan=True)
        assert np.array_equal(m1.indices, m2.indices)

    def test_deterministic(self):
        rng = np.random.default_rng(21)
        f = frame_of(a=rng.normal(size=100))
        spec = ErrorSpec("outlier", rate=0.3, seed=11)
        out1, m1 = perturb(f, "a", spec)
        out2, m2 = perturb(f, "a", spec)
        assert np.array_equal(out1.values, out2.values)
        assert np.array_equal(m1.indices, m2.indices)

    def test_input_frame_untouched(self):
        f = frame_of(a=np.arange(30.0))
        before = f.values.copy()
        perturb(f, "a", ErrorSpec("missing", rate=0.5, seed=1))
        assert np.array_equal(f.values, before)

    def test_unknown_channel(self):
        f = frame_of(a=np.arange(10.0))
        with pytest.raises((CorruptionError, Exception), match="no such channel"):
            perturb(f, "zzz", ErrorSpec("missing", rate=0.1, seed=0))

    def test_channel_streams_are_isolated(self):
        rng = np.random.default_rng(30)
        f = frame_of(a=rng.normal(size=100), b=rng.normal(size=100))
        spec = ErrorSpec("missing", rate=0.3, seed=99)
        _, mask_a = perturb(f, "a", spec)
        _, mask_b = perturb(f, "b", spec)
        # Same spec on different channels draws from different streams.
        assert not np.array_equal(mask_a.indices, mask_b.indices)

    def test_locality_across_kinds(self):
        rng = np.random.default_rng(31)
        f = frame_of(a=rng.normal(size=200), b=rng.normal(size=200))
        for kind in ("outlier", "missing", "clip"):
            out, mask = perturb(f, "a", ErrorSpec(kind, rate=0.25, seed=17))
            untouched = np.setdiff1d(np.arange(200), mask.indices)
            assert np.array_equal(out.column("a")[untouched], f.column("a")[untouched])
            assert np.array_equal(out.column("b"), f.column("b"))


class TestSpecValidation:
    def test_bad_rate(self):
        with pytest.raises(CorruptionError):
            ErrorSpec("missing", rate=1.5)

    def test_bad_clip_bounds(self):
        with pytest.raises(CorruptionError):
            ErrorSpec("clip", rate=0.1, q_lower=0.9, q_upper=0.2)

    def test_unknown_kind(self):
        with pytest.raises(CorruptionError):
            ErrorSpec("scramble", rate=0.1)


def test_mask_csv_export(tmp_path):
    mask = ErrorMask("lvl", np.array([3, 4, 9]), np.array([3, 9]))
    path = tmp_path / "mask.csv"
    write_mask_csv([mask], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "channel,index,effective"
    assert lines[1:] == ["lvl,3,1", "lvl,4,0", "lvl,9,1"]
