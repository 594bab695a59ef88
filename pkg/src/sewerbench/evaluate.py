"""Metrics, peak-event extraction, the robustness sweep and trade-off indices.

The sweep walks the hierarchical grid (model family -> trial -> feature ->
error kind -> error rate), corrupting one feature of the test inputs per
cell while ground-truth targets stay clean, and records full plus
peak-masked MSE per cell. Aggregations turn those records into the
Computation Complexity Index (CCI) and Robustness Index (RI).
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corrupt import CorruptionError, ErrorSpec
from .corrupt import perturb as corrupt_channel
from .forecast import ForecastError, ForecastTask, ForecasterHandle, build_windows, predict
from .frame import TimeSeriesFrame

RECORD_SCHEMA = "eval-records/1"


class EvalError(ValueError):
    """Raised when an evaluation contract is violated."""


@dataclass(frozen=True)
class PeakMask:
    """Boolean selection of test time steps belonging to peak events."""

    window: int
    top_fraction: float
    selected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "selected", np.asarray(self.selected, dtype=bool))


@dataclass(frozen=True)
class EvalRecord:
    """One cell of the robustness grid (or a clean baseline when feature is None)."""

    model_type: str
    seed: int
    mode: str
    feature: str | None
    error_kind: str | None
    error_rate: float
    mse: float
    mse_peak: float
    effective_rate: float
    error: str | None = None


@dataclass(frozen=True)
class TradeoffIndices:
    """Per-model CCI and RI plus the normalized components behind them."""

    cci: float
    ri: float
    components: dict[str, float] = field(default_factory=dict)


def mse(
    pred: np.ndarray,
    truth: np.ndarray,
    mask: PeakMask | None = None,
    origins: np.ndarray | None = None,
) -> float:
    """Mean squared error over all cells, or over peak-masked cells only.

    With a mask, cell (w, s) is kept iff the mask selects the target time
    index origins[w] + 1 + s, so ``origins`` must come from the window set
    the predictions were made on.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise EvalError("prediction and truth shapes differ")
    sq = (pred - truth) ** 2
    if mask is None:
        if sq.size == 0:
            raise EvalError("empty evaluation set")
        return float(np.mean(sq))
    if origins is None:
        raise EvalError("peak-masked MSE needs window origins")
    horizon = pred.shape[1]
    times = np.asarray(origins)[:, None] + 1 + np.arange(horizon)[None, :]
    keep = mask.selected[times]
    if not keep.any():
        raise EvalError("empty evaluation set")
    return float(np.mean(sq[keep]))


def peak_mask(target: np.ndarray, window: int = 48, top_fraction: float = 0.2) -> PeakMask:
    """Select the time steps whose smoothed consecutive changes are largest.

    Takes absolute consecutive differences, smooths them with a centered
    rolling mean (window shrinks at the edges) and selects indices whose
    smoothed value exceeds the (1 - top_fraction) quantile. The first index
    has no difference and is never selected.
    """
    target = np.asarray(target, dtype=np.float64)
    if window < 1:
        raise EvalError("window must be >= 1")
    if not 0.0 < top_fraction <= 1.0:
        raise EvalError("top_fraction must be in (0, 1]")
    if target.size <= window + 1:
        raise EvalError("series too short for the rolling window")
    if np.isnan(target).any():
        raise EvalError("target contains missing values")
    diffs = np.abs(np.diff(target))
    m = diffs.size
    left = window // 2
    right = window - left - 1
    cumsum = np.concatenate([[0.0], np.cumsum(diffs)])
    lo = np.maximum(np.arange(m) - left, 0)
    hi = np.minimum(np.arange(m) + right + 1, m)
    rolled = (cumsum[hi] - cumsum[lo]) / (hi - lo)
    if rolled.max() == rolled.min():
        raise EvalError("no peaks")
    if top_fraction == 1.0:
        above = np.ones(m, dtype=bool)
    else:
        above = rolled > np.quantile(rolled, 1.0 - top_fraction)
    selected = np.zeros(target.size, dtype=bool)
    selected[1:] = above
    return PeakMask(window, top_fraction, selected)


# -- robustness sweep ---------------------------------------------------------


def _cell_seed(seed_base: int, trial_seed: int, feature: str, kind: str, rate: float) -> int:
    entropy = (
        (int(seed_base) & 0xFFFFFFFF) << 32
        | (int(trial_seed) & 0xFFFF) << 16
        | zlib.crc32(f"{feature}|{kind}|{rate:.6f}".encode()) & 0xFFFF
    )
    return entropy


def robustness_sweep(
    handles: list[ForecasterHandle],
    test: TimeSeriesFrame,
    task: ForecastTask,
    features: list[str],
    kinds: list[str],
    rates: list[float],
    seed_base: int = 0,
    alpha: float = 1.1,
    beta: float = 0.1,
    q_lower: float = 0.2,
    q_upper: float = 0.8,
    cluster_mean_len: float = 24.0,
    peak_window: int = 48,
    peak_fraction: float = 0.2,
    jobs: int = 1,
) -> list[EvalRecord]:
    """Run the nested robustness grid over already-trained models.

    Per (trial, feature, kind, rate) cell the named test channel is
    corrupted, windows are rebuilt from the corrupted frame, and the model
    is scored against the clean targets, full and peak-masked. Every model
    family sees the same corruption for the same trial seed, so families
    are compared on identical perturbations. Clean baselines (feature None)
    are recorded once per handle. Failed cells carry an error message
    instead of aborting the sweep. Records come back sorted by cell
    coordinates, independent of scheduling.
    """
    target = test.target_name
    indicator = target + "__imputed"
    for feature in features:
        test.index(feature)
        if feature == indicator:
            raise EvalError("features must exclude the target's imputation indicator")
    for rate in rates:
        if not 0.0 <= rate <= 1.0:
            raise EvalError("rates must lie in [0, 1]")

    clean_windows = build_windows(test, task)
    pmask = peak_mask(test.column(target), peak_window, peak_fraction)
    perturbed_cache: dict[tuple, tuple] = {}

    def perturbed_windows(trial_seed: int, feature: str, kind: str, rate: float):
        key = (trial_seed, feature, kind, rate)
        if key not in perturbed_cache:
            spec = ErrorSpec(
                kind=kind,
                rate=rate,
                alpha=alpha,
                beta=beta,
                q_lower=q_lower,
                q_upper=q_upper,
                cluster_mean_len=cluster_mean_len,
                seed=_cell_seed(seed_base, trial_seed, feature, kind, rate),
            )
            frame, mask = corrupt_channel(test, feature, spec)
            perturbed_cache[key] = (build_windows(frame, task), mask.effective_rate(test.length))
        return perturbed_cache[key]

    def sweep_handle(handle: ForecasterHandle) -> list[EvalRecord]:
        records = []
        clean_pred = predict(handle, clean_windows)
        clean_full = mse(clean_pred, clean_windows.targets)
        clean_peak = mse(clean_pred, clean_windows.targets, pmask, clean_windows.origins)
        records.append(
            EvalRecord(handle.family, handle.seed, task.mode, None, None, 0.0, clean_full, clean_peak, 0.0)
        )
        for feature in features:
            for kind in kinds:
                for rate in rates:
                    try:
                        windows, eff_rate = perturbed_windows(handle.seed, feature, kind, rate)
                        pred = predict(handle, windows)
                        full = mse(pred, clean_windows.targets)
                        peak = mse(pred, clean_windows.targets, pmask, clean_windows.origins)
                        records.append(
                            EvalRecord(handle.family, handle.seed, task.mode, feature, kind, rate, full, peak, eff_rate)
                        )
                    except (CorruptionError, ForecastError, EvalError) as exc:
                        records.append(
                            EvalRecord(
                                handle.family, handle.seed, task.mode, feature, kind, rate,
                                float("nan"), float("nan"), 0.0, str(exc),
                            )
                        )
        return records

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(sweep_handle, handles))
    else:
        chunks = [sweep_handle(h) for h in handles]
    records = [record for chunk in chunks for record in chunk]
    records.sort(key=lambda r: (r.model_type, r.seed, r.feature or "", r.error_kind or "", r.error_rate))
    return records


# -- aggregations -------------------------------------------------------------


def _clean_records(records: list[EvalRecord]) -> list[EvalRecord]:
    return [r for r in records if r.feature is None and r.error is None]


def consistency(records: list[EvalRecord]) -> dict[str, tuple[float, float]]:
    """Per-model (median, IQR) of clean MSE across random-seed trials."""
    by_model: dict[str, list[float]] = {}
    for record in _clean_records(records):
        by_model.setdefault(record.model_type, []).append(record.mse)
    if not by_model:
        raise EvalError("insufficient trials")
    out = {}
    for model, mses in sorted(by_model.items()):
        if len(mses) < 2:
            raise EvalError("insufficient trials")
        q1, median, q3 = np.quantile(mses, [0.25, 0.5, 0.75])
        out[model] = (float(median), float(q3 - q1))
    return out


def mse_increases(records: list[EvalRecord]) -> dict[str, np.ndarray]:
    """Per-model absolute MSE increases of every perturbed cell over its clean baseline."""
    clean = {(r.model_type, r.seed): r.mse for r in _clean_records(records)}
    out: dict[str, list[float]] = {}
    for record in records:
        if record.feature is None or record.error is not None:
            continue
        base = clean.get((record.model_type, record.seed))
        if base is None:
            raise EvalError(f"no clean baseline for {record.model_type} seed {record.seed}")
        out.setdefault(record.model_type, []).append(abs(record.mse - base))
    return {model: np.array(vals) for model, vals in sorted(out.items())}


def cci(measurements: dict[str, tuple[float, float]]) -> dict[str, float]:
    """Computation Complexity Index: mean of max-normalized time and size."""
    if not measurements:
        raise EvalError("invalid measurement")
    for t, s in measurements.values():
        if t <= 0 or s <= 0:
            raise EvalError("invalid measurement")
    max_t = max(t for t, _ in measurements.values())
    max_s = max(s for _, s in measurements.values())
    return {name: 0.5 * (t / max_t + s / max_s) for name, (t, s) in measurements.items()}


def ri(components: dict[str, tuple[float, float, float]]) -> dict[str, float]:
    """Robustness Index: mean of three max-normalized robustness components.

    Components per model: IQR of clean MSE, mean absolute MSE increase
    under perturbation, IQR of the absolute MSE increase. Lower is more
    robust. A component that is zero for every model contributes zero for
    all of them.
    """
    if not components:
        raise EvalError("invalid measurement")
    for triple in components.values():
        if any(c < 0 for c in triple):
            raise EvalError("invalid measurement")
    maxima = [max(triple[i] for triple in components.values()) for i in range(3)]
    out = {}
    for name, triple in components.items():
        terms = [t / m if m > 0 else 0.0 for t, m in zip(triple, maxima)]
        out[name] = sum(terms) / 3.0
    return out


def local_robustness(records: list[EvalRecord]) -> dict[str, float]:
    """Robustness figure for local models: the clean-MSE IQR alone.

    Local models already run under total exogenous-data loss, so the
    perturbation terms of the robustness index do not apply to them.
    """
    if any(r.mode != "local" for r in records):
        raise EvalError("mode mismatch")
    return {model: iqr for model, (_, iqr) in consistency(records).items()}


def tradeoff_indices(
    records: list[EvalRecord],
    complexity: dict[str, tuple[float, float]],
) -> dict[str, TradeoffIndices]:
    """Combine sweep records and complexity measurements into CCI/RI per model."""
    cons = consistency(records)
    increases = mse_increases(records)
    cci_values = cci(complexity)
    ri_inputs = {}
    for model, (_, iqr_clean) in cons.items():
        inc = increases.get(model, np.zeros(1))
        q1, q3 = np.quantile(inc, [0.25, 0.75]) if inc.size > 1 else (0.0, 0.0)
        ri_inputs[model] = (iqr_clean, float(np.mean(inc)), float(q3 - q1))
    ri_values = ri(ri_inputs)
    out = {}
    for model in sorted(cons):
        iqr_clean, mean_inc, iqr_inc = ri_inputs[model]
        out[model] = TradeoffIndices(
            cci=cci_values[model],
            ri=ri_values[model],
            components={
                "median_clean_mse": cons[model][0],
                "iqr_clean_mse": iqr_clean,
                "mean_abs_mse_increase": mean_inc,
                "iqr_abs_mse_increase": iqr_inc,
                "inference_time_s": complexity[model][0],
                "size_bytes": complexity[model][1],
            },
        )
    return out


# -- record persistence --------------------------------------------------------


def write_records(path: str | Path, records: list[EvalRecord], meta: dict | None = None) -> None:
    """Write records as JSON lines, one record per line, meta header first."""
    header = {"schema": RECORD_SCHEMA}
    header.update(meta or {})
    lines = [json.dumps(header, sort_keys=True)]
    for record in records:
        lines.append(json.dumps(asdict(record), sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path: str | Path) -> tuple[list[EvalRecord], dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EvalError("empty records file")
    meta = json.loads(lines[0])
    if meta.get("schema") != RECORD_SCHEMA:
        raise EvalError("unsupported records schema")
    records = [EvalRecord(**json.loads(line)) for line in lines[1:] if line]
    return records, meta
