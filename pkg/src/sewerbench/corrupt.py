"""Parametric data corruption: outlier shifts, missing gaps, value clipping.

The three error kinds model common sensor pathologies. Corrupted cells are
sampled in consecutive clusters (mimicking downtimes), with run lengths
drawn geometrically around a configurable mean. Everything is a pure
function of (frame, channel, spec): the sampling stream is derived from
(spec.seed, channel name, kind), so corruptions of different channels can
run in parallel without changing results.

Quantiles use linear interpolation between order statistics, computed over
the non-missing values of the series being perturbed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frame import TimeSeriesFrame
from .rng import derive_stream, geometric, normal

KIND_OUTLIER = "outlier"
KIND_MISSING = "missing"
KIND_CLIP = "clip"
KINDS = (KIND_OUTLIER, KIND_MISSING, KIND_CLIP)


class CorruptionError(ValueError):
    """Raised when an error model cannot be applied as specified."""


@dataclass(frozen=True)
class FenceStats:
    """Quartiles, IQR fences and mean of one channel."""

    q1: float
    q3: float
    iqr: float
    mean: float
    lower_fence: float
    upper_fence: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> FenceStats:
        finite = values[np.isfinite(values)]
        if finite.size < 4:
            raise CorruptionError("degenerate distribution")
        q1, q3 = np.quantile(finite, [0.25, 0.75])
        iqr = q3 - q1
        return cls(
            q1=float(q1),
            q3=float(q3),
            iqr=float(iqr),
            mean=float(np.mean(finite)),
            lower_fence=float(q1 - 1.5 * iqr),
            upper_fence=float(q3 + 1.5 * iqr),
        )

    def is_outlier(self, x: np.ndarray) -> np.ndarray:
        return (x < self.lower_fence) | (x > self.upper_fence)


@dataclass(frozen=True)
class ErrorSpec:
    """One parametric perturbation: kind, rate and kind-specific knobs."""

    kind: str
    rate: float
    alpha: float = 1.1
    beta: float = 0.1
    q_lower: float = 0.2
    q_upper: float = 0.8
    cluster_mean_len: float = 24.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CorruptionError(f"unknown error kind {self.kind!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise CorruptionError("rate must be in [0, 1]")
        if self.beta < 0.0:
            raise CorruptionError("beta must be >= 0")
        if self.kind == KIND_CLIP and not 0.0 <= self.q_lower < self.q_upper <= 1.0:
            raise CorruptionError("clip quantile bounds must satisfy 0 <= q_lower < q_upper <= 1")
        if self.cluster_mean_len < 1.0:
            raise CorruptionError("cluster_mean_len must be >= 1")


@dataclass(frozen=True)
class ErrorMask:
    """Cells targeted by one corruption, and the subset actually changed."""

    channel: str
    indices: np.ndarray
    effective_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "effective_indices", np.asarray(self.effective_indices, dtype=np.int64))

    def effective_rate(self, n: int) -> float:
        return self.effective_indices.size / n if n else 0.0


def target_count(rate: float, n: int) -> int:
    """Number of cells to corrupt: round(rate * n), half away from zero."""
    return int(np.floor(rate * n + 0.5))


def fence_stats(frame: TimeSeriesFrame, channel: str) -> FenceStats:
    """IQR fences and mean of one channel, over its non-missing values."""
    return FenceStats.from_values(frame.column(channel))


def sample_clusters(n: int, rate: float, cluster_mean_len: float = 24.0, seed: int = 0) -> np.ndarray:
    """Sample round(rate*n) indices forming non-overlapping contiguous runs.

    Run lengths are geometric with the given mean (the last run truncated so
    the total is exact); run placements are uniform over all non-overlapping
    arrangements. Deterministic for fixed arguments.
    """
    rng = derive_stream(seed, "clusters")
    return _sample_clusters(rng, n, rate, cluster_mean_len)


def _sample_clusters(rng: np.random.Generator, n: int, rate: float, cluster_mean_len: float) -> np.ndarray:
    if n < 1:
        raise CorruptionError("series length must be >= 1")
    k = target_count(rate, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return np.arange(n, dtype=np.int64)
    lengths: list[int] = []
    total = 0
    while total < k:
        run = min(geometric(rng, cluster_mean_len), k - total)
        lengths.append(run)
        total += run
    m = len(lengths)
    # Collapse each run to one token among the n-k free cells, pick token
    # positions uniformly, then expand: this is the standard bijection onto
    # non-overlapping placements.
    slots = np.sort(np.argsort(rng.random(n - k + m), kind="stable")[:m])
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    starts = slots - np.arange(m) + offsets
    indices = np.concatenate([np.arange(s, s + l) for s, l in zip(starts, lengths)])
    return indices.astype(np.int64)


def apply_outliers(
    frame: TimeSeriesFrame,
    channel: str,
    spec: ErrorSpec,
    stats: FenceStats | None = None,
) -> tuple[TimeSeriesFrame, ErrorMask]:
    """Shift sampled cells beyond the IQR fences.

    Cells below the mean are shifted down by alpha * (mean - lower_fence),
    cells at or above it up by alpha * (upper_fence - mean), plus Gaussian
    noise with standard deviation beta * IQR. With beta = 0 and alpha >= 1
    every perturbed cell lands outside the original fences.
    """
    if spec.kind != KIND_OUTLIER:
        raise CorruptionError("spec kind must be 'outlier'")
    col = frame.column(channel)
    if stats is None:
        stats = FenceStats.from_values(col)
    if stats.iqr == 0.0:
        raise CorruptionError("degenerate distribution")
    rng = derive_stream(spec.seed, channel, spec.kind)
    indices = _sample_clusters(rng, col.size, spec.rate, spec.cluster_mean_len)
    new_col = col.copy()
    if indices.size:
        x = col[indices]
        noise = spec.beta * stats.iqr * normal(rng, indices.size) if spec.beta > 0 else 0.0
        down = x - spec.alpha * (stats.mean - stats.lower_fence)
        up = x + spec.alpha * (stats.upper_fence - stats.mean)
        new_col[indices] = np.where(x < stats.mean, down, up) + noise
    mask = ErrorMask(channel, indices, indices)
    return frame.with_column(channel, new_col), mask


def apply_missing(frame: TimeSeriesFrame, channel: str, spec: ErrorSpec) -> tuple[TimeSeriesFrame, ErrorMask]:
    """Blank sampled cells to the missing sentinel (NaN)."""
    if spec.kind != KIND_MISSING:
        raise CorruptionError("spec kind must be 'missing'")
    col = frame.column(channel)
    rng = derive_stream(spec.seed, channel, spec.kind)
    indices = _sample_clusters(rng, col.size, spec.rate, spec.cluster_mean_len)
    new_col = col.copy()
    new_col[indices] = np.nan
    mask = ErrorMask(channel, indices, indices)
    return frame.with_column(channel, new_col), mask


def apply_clipping(frame: TimeSeriesFrame, channel: str, spec: ErrorSpec) -> tuple[TimeSeriesFrame, ErrorMask]:
    """Clamp sampled cells to the channel's [Q_lower, Q_upper] quantile bounds.

    Only cells strictly outside the bounds change, so the effective error
    rate can be lower than the requested one.
    """
    if spec.kind != KIND_CLIP:
        raise CorruptionError("spec kind must be 'clip'")
    col = frame.column(channel)
    finite = col[np.isfinite(col)]
    if finite.size < 1:
        raise CorruptionError("degenerate distribution")
    q_lo, q_hi = np.quantile(finite, [spec.q_lower, spec.q_upper])
    rng = derive_stream(spec.seed, channel, spec.kind)
    indices = _sample_clusters(rng, col.size, spec.rate, spec.cluster_mean_len)
    new_col = col.copy()
    if indices.size:
        x = col[indices]
        new_col[indices] = np.clip(x, q_lo, q_hi)
        changed = indices[np.isfinite(x) & ((x < q_lo) | (x > q_hi))]
    else:
        changed = indices
    mask = ErrorMask(channel, indices, changed)
    return frame.with_column(channel, new_col), mask


def perturb(
    frame: TimeSeriesFrame,
    channel: str,
    spec: ErrorSpec,
    stats: FenceStats | None = None,
) -> tuple[TimeSeriesFrame, ErrorMask]:
    """Apply one error spec to one channel; dispatches on spec.kind.

    Fence statistics and quantile bounds default to the series being
    perturbed; pass ``stats`` to anchor outlier fences on another window
    (e.g. the training period).
    """
    frame.index(channel)  # raises "no such channel" early
    if spec.kind == KIND_OUTLIER:
        return apply_outliers(frame, channel, spec, stats)
    if spec.kind == KIND_MISSING:
        return apply_missing(frame, channel, spec)
    return apply_clipping(frame, channel, spec)


def mask_runs(indices: np.ndarray) -> list[tuple[int, int]]:
    """Decompose a sorted index set into maximal (start, length) runs."""
    if indices.size == 0:
        return []
    idx = np.sort(np.asarray(indices))
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [idx.size - 1]])
    return [(int(idx[s]), int(idx[e] - idx[s] + 1)) for s, e in zip(starts, ends)]


def write_mask_csv(masks: list[ErrorMask], path: str | Path) -> None:
    """Audit export: one row per targeted cell, flagging effective changes."""
    lines = ["channel,index,effective"]
    for mask in masks:
        effective = set(mask.effective_indices.tolist())
        for i in mask.indices.tolist():
            lines.append(f"{mask.channel},{i},{1 if i in effective else 0}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
