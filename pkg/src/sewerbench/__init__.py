"""Robustness evaluation harness for sewer-level time-series forecasting.

Provides an hourly multichannel data model, parametric error injection
(outliers, missing values, clipping) with clustered sampling, baseline
forecasters spanning the recursive/direct axis, a hierarchical robustness
sweep with peak-event evaluation, complexity/robustness trade-off indices,
a synthetic combined-sewer data generator, and a subprocess protocol for
attaching external models.
"""

from .corrupt import (
    ErrorMask,
    ErrorSpec,
    FenceStats,
    apply_clipping,
    apply_missing,
    apply_outliers,
    fence_stats,
    perturb,
    sample_clusters,
)
from .evaluate import (
    EvalRecord,
    PeakMask,
    TradeoffIndices,
    cci,
    consistency,
    local_robustness,
    mse,
    peak_mask,
    ri,
    robustness_sweep,
    tradeoff_indices,
)
from .forecast import (
    FAMILIES,
    ForecastTask,
    ForecasterHandle,
    TrainConfig,
    WindowSet,
    build_windows,
    fit,
    measure_complexity,
    predict,
)
from .frame import (
    ChannelSpec,
    ChronoSplit,
    TimeSeriesFrame,
    interpolate_missing,
    load_dataset,
    make_placeholder_future,
    read_csv,
    resample_hourly,
    split,
    write_csv,
    write_schema,
)
from .plugin import Capabilities, PluginClient, PluginEndpoint, remote_predict
from .synth import SynthConfig, canonical_config, generate

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "ChronoSplit",
    "TimeSeriesFrame",
    "interpolate_missing",
    "load_dataset",
    "make_placeholder_future",
    "read_csv",
    "resample_hourly",
    "split",
    "write_csv",
    "write_schema",
    "ErrorMask",
    "ErrorSpec",
    "FenceStats",
    "apply_clipping",
    "apply_missing",
    "apply_outliers",
    "fence_stats",
    "perturb",
    "sample_clusters",
    "FAMILIES",
    "ForecastTask",
    "ForecasterHandle",
    "TrainConfig",
    "WindowSet",
    "build_windows",
    "fit",
    "measure_complexity",
    "predict",
    "EvalRecord",
    "PeakMask",
    "TradeoffIndices",
    "cci",
    "consistency",
    "local_robustness",
    "mse",
    "peak_mask",
    "ri",
    "robustness_sweep",
    "tradeoff_indices",
    "Capabilities",
    "PluginClient",
    "PluginEndpoint",
    "remote_predict",
    "SynthConfig",
    "canonical_config",
    "generate",
]
