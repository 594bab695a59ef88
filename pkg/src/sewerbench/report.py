"""Static SVG figures and CSV tables summarizing a finished run.

Four figure types: clean MSE per model with seed spread, peak-event MSE,
distributions of the MSE increase under perturbation, and trade-off
scatter plots (MSE against consistency IQR, RI and CCI). Every artifact
carries the config hash and base seed so it can be regenerated from the
records file alone.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalRecord, TradeoffIndices, consistency, mse_increases


def _stamp(fig, meta: dict) -> None:
    note = f"config {meta.get('config_sha256', '?')[:12]} | seed_base {meta.get('seed_base', '?')}"
    fig.text(0.99, 0.01, note, ha="right", va="bottom", fontsize=6, color="gray")


def _finish(fig, path: Path, meta: dict) -> None:
    _stamp(fig, meta)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    fig.savefig(path, format="svg")
    plt.close(fig)


def _clean_by_model(records: list[EvalRecord], attr: str) -> dict[str, np.ndarray]:
    out: dict[str, list[float]] = {}
    for r in records:
        if r.feature is None and r.error is None:
            out.setdefault(r.model_type, []).append(getattr(r, attr))
    return {m: np.array(v) for m, v in sorted(out.items())}


def _errorbar_figure(values: dict[str, np.ndarray], title: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6, 4))
    models = list(values)
    medians = [float(np.median(values[m])) for m in models]
    q1 = [float(np.quantile(values[m], 0.25)) for m in models]
    q3 = [float(np.quantile(values[m], 0.75)) for m in models]
    err = np.array([np.subtract(medians, q1), np.subtract(q3, medians)])
    ax.errorbar(range(len(models)), medians, yerr=err, fmt="o", capsize=4)
    ax.set_xticks(range(len(models)), models, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return fig


def plot_mse_by_model(records: list[EvalRecord], path: Path, meta: dict) -> None:
    values = _clean_by_model(records, "mse")
    fig = _errorbar_figure(values, "Clean test MSE (median and IQR over seeds)", "MSE")
    _finish(fig, path, meta)


def plot_peak_mse_by_model(records: list[EvalRecord], path: Path, meta: dict) -> None:
    values = _clean_by_model(records, "mse_peak")
    fig = _errorbar_figure(values, "Peak-event test MSE (median and IQR over seeds)", "MSE on peak mask")
    _finish(fig, path, meta)


def plot_mse_increase(records: list[EvalRecord], path: Path, meta: dict) -> None:
    increases = mse_increases(records)
    fig, ax = plt.subplots(figsize=(6, 4))
    if increases:
        models = list(increases)
        ax.boxplot([increases[m] for m in models], tick_labels=models)
        ax.set_xticklabels(models, rotation=20, ha="right")
    ax.set_ylabel("|MSE perturbed - MSE clean|")
    ax.set_title("MSE increase under perturbation (all cells)")
    ax.grid(alpha=0.3)
    _finish(fig, path, meta)


def plot_tradeoff(
    records: list[EvalRecord],
    panels: list[tuple[dict[str, float], str]],
    path: Path,
    meta: dict,
) -> None:
    """Scatter median clean MSE against each supplied per-model axis."""
    cons = consistency(records)
    fig, axes = plt.subplots(1, len(panels), figsize=(4.5 * len(panels), 4))
    if len(panels) == 1:
        axes = [axes]
    for ax, (values, label) in zip(axes, panels):
        for model, (median, _) in cons.items():
            if model in values:
                ax.scatter(values[model], median, label=model)
                ax.annotate(model, (values[model], median), fontsize=7,
                            textcoords="offset points", xytext=(4, 4))
        ax.set_xlabel(label)
        ax.set_ylabel("median clean MSE")
        ax.grid(alpha=0.3)
    fig.suptitle("Trade-off analysis")
    _finish(fig, path, meta)


def write_summary_csv(records: list[EvalRecord], path: Path, meta: dict) -> None:
    cons = consistency(records)
    peaks = _clean_by_model(records, "mse_peak")
    lines = [f"# config_sha256={meta.get('config_sha256', '')} seed_base={meta.get('seed_base', '')}"]
    lines.append("model,median_mse,iqr_mse,median_peak_mse")
    for model, (median, iqr) in cons.items():
        lines.append(f"{model},{median!r},{iqr!r},{float(np.median(peaks[model]))!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_increase_csv(records: list[EvalRecord], path: Path, meta: dict) -> None:
    cells: dict[tuple[str, str, float], list[float]] = {}
    clean = {(r.model_type, r.seed): r.mse for r in records if r.feature is None and r.error is None}
    for r in records:
        if r.feature is None or r.error is not None:
            continue
        increase = abs(r.mse - clean[(r.model_type, r.seed)])
        cells.setdefault((r.model_type, r.error_kind, r.error_rate), []).append(increase)
    lines = [f"# config_sha256={meta.get('config_sha256', '')} seed_base={meta.get('seed_base', '')}"]
    lines.append("model,error_kind,error_rate,mean_abs_mse_increase,n_cells")
    for (model, kind, rate), vals in sorted(cells.items()):
        lines.append(f"{model},{kind},{rate!r},{float(np.mean(vals))!r},{len(vals)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_report(
    records: list[EvalRecord],
    indices: dict[str, TradeoffIndices] | None,
    out_dir: Path,
    meta: dict,
    mode: str = "global",
) -> list[Path]:
    """Emit every figure and table into ``out_dir``; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, fn, *args):
        path = out_dir / name
        fn(*args, path, meta)
        written.append(path)

    emit("mse_by_model.svg", plot_mse_by_model, records)
    emit("mse_peak_by_model.svg", plot_peak_mse_by_model, records)
    has_perturbed = any(r.feature is not None for r in records)
    if has_perturbed:
        emit("mse_increase.svg", plot_mse_increase, records)
    # Local mode reports consistency only; global mode adds the RI axis.
    panels = [({m: iqr for m, (_, iqr) in consistency(records).items()}, "IQR of clean MSE")]
    if mode != "local" and indices:
        panels.append(({m: idx.ri for m, idx in indices.items()}, "RI"))
    if indices:
        panels.append(({m: idx.cci for m, idx in indices.items()}, "CCI"))
    emit("tradeoff.svg", plot_tradeoff, records, panels)
    emit("summary_clean.csv", write_summary_csv, records)
    if has_perturbed:
        emit("mse_increase.csv", write_increase_csv, records)
    return written
