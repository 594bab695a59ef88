"""Forecast task geometry, sliding windows and baseline model families.

The built-in families span the structural axis that matters for
robustness work: recursive one-step prediction (errors compound through
the feedback loop) versus direct multi-horizon prediction (each step is
an independent map of the input window), plus trivial references and a
small MLP trained in-repo. Heavier architectures attach out-of-process
through the plugin protocol and show up here as the ``external_plugin``
family.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from . import mlp
from .frame import TimeSeriesFrame
from .rng import derive_stream

SEASON_STEPS = 24  # one day of hourly data

FAMILY_PERSISTENCE = "persistence"
FAMILY_SEASONAL = "seasonal_naive"
FAMILY_LINEAR_DIRECT = "linear_direct"
FAMILY_LINEAR_RECURSIVE = "linear_recursive"
FAMILY_MLP = "mlp_direct"
FAMILY_PLUGIN = "external_plugin"
FAMILIES = (
    FAMILY_PERSISTENCE,
    FAMILY_SEASONAL,
    FAMILY_LINEAR_DIRECT,
    FAMILY_LINEAR_RECURSIVE,
    FAMILY_MLP,
    FAMILY_PLUGIN,
)

SERIALIZATION_VERSION = 1


class ForecastError(ValueError):
    """Raised when a forecasting contract is violated."""


@dataclass(frozen=True)
class ForecastTask:
    """Geometry and mode of the prediction problem."""

    input_len: int = 72
    horizon: int = 12
    mode: str = "global"
    batch_size: int = 256

    def __post_init__(self):
        if self.input_len < 1 or self.horizon < 1:
            raise ForecastError("input_len and horizon must be >= 1")
        if self.mode not in ("global", "local"):
            raise ForecastError(f"unknown task mode {self.mode!r}")


@dataclass(frozen=True)
class Layout:
    """Feature layout a model was fit against; predictions require a match."""

    input_channels: tuple[str, ...]
    future_channels: tuple[str, ...]
    target: str
    input_len: int
    horizon: int

    @property
    def target_pos(self) -> int:
        return self.input_channels.index(self.target)


@dataclass(frozen=True)
class WindowSet:
    """Dense stride-1 sliding windows over one chronological segment.

    Window w spans input times [origin-L+1, origin] and target times
    [origin+1, origin+H]; step s of the target row predicts time
    origin + 1 + s. Windows never cross segment boundaries because they
    are built per segment.
    """

    inputs: np.ndarray       # [window, input_len, n_input_channels]
    future_covs: np.ndarray  # [window, horizon, n_future_channels]
    targets: np.ndarray      # [window, horizon]
    origins: np.ndarray      # time index of the last input step, per window
    layout: Layout

    @property
    def n_windows(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and regularization settings for the trainable families."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 256
    ridge_lambda: float = 1e-3
    hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ForecastError("learning rate must be positive")
        if self.patience < 1:
            raise ForecastError("patience must be >= 1")


@dataclass(frozen=True)
class ForecasterHandle:
    """A fitted forecaster: immutable parameters plus size bookkeeping."""

    family: str
    seed: int
    layout: Layout
    params: dict
    param_count: int
    serialized_size: int


def build_windows(frame: TimeSeriesFrame, task: ForecastTask) -> WindowSet:
    """Slice one segment into dense sliding windows.

    Global mode feeds the target, all past covariates and all imputation
    indicators as input channels and all future covariates over the
    horizon. Local mode restricts the inputs to the target history and the
    future side to the shifted-target placeholder. Missing input cells are
    zero-filled; where a channel has an indicator channel in the input set,
    the indicator is raised at those cells so models see the flags.
    """
    target = frame.target_name
    if task.mode == "local":
        placeholder = target + "__placeholder"
        if placeholder not in frame.names:
            raise ForecastError(
                "local mode requires the shifted-target placeholder; run make_placeholder_future"
            )
        input_names = [target]
        future_names = [placeholder]
    else:
        input_names = [c.name for c in frame.channels if c.role in ("target", "past_covariate", "imputation_indicator")]
        future_names = [c.name for c in frame.channels if c.role == "future_covariate"]

    n = frame.length
    length, horizon = task.input_len, task.horizon
    n_windows = n - length - horizon + 1
    if n_windows < 1:
        raise ForecastError("insufficient history")

    mat = np.column_stack([frame.column(name) for name in input_names])
    for pos, name in enumerate(input_names):
        indicator = name + "__imputed"
        if indicator in input_names:
            ind_pos = input_names.index(indicator)
            mat[:, ind_pos] = np.maximum(mat[:, ind_pos], np.isnan(mat[:, pos]).astype(np.float64))
    mat = np.nan_to_num(mat, nan=0.0)

    windows = np.lib.stride_tricks.sliding_window_view(mat, length, axis=0)
    inputs = np.ascontiguousarray(windows[:n_windows].transpose(0, 2, 1))

    target_col = frame.column(target)
    target_windows = np.lib.stride_tricks.sliding_window_view(target_col, horizon)
    targets = np.ascontiguousarray(target_windows[length : length + n_windows])

    if future_names:
        fut = np.nan_to_num(np.column_stack([frame.column(name) for name in future_names]), nan=0.0)
        fut_windows = np.lib.stride_tricks.sliding_window_view(fut, horizon, axis=0)
        future_covs = np.ascontiguousarray(fut_windows[length : length + n_windows].transpose(0, 2, 1))
    else:
        future_covs = np.zeros((n_windows, horizon, 0))

    origins = np.arange(length - 1, length - 1 + n_windows, dtype=np.int64)
    layout = Layout(tuple(input_names), tuple(future_names), target, length, horizon)
    return WindowSet(inputs, future_covs, targets, origins, layout)


# -- fitting ----------------------------------------------------------------


def _direct_design(windows: WindowSet) -> np.ndarray:
    """Flattened window plus flattened future covariates plus a bias column."""
    w = windows.n_windows
    parts = [windows.inputs.reshape(w, -1)]
    if windows.future_covs.shape[2]:
        parts.append(windows.future_covs.reshape(w, -1))
    parts.append(np.ones((w, 1)))
    return np.concatenate(parts, axis=1)


def _recursive_design(windows: WindowSet) -> tuple[np.ndarray, np.ndarray]:
    """One-step pairs: [target lags | future covariates at t+1 | 1] -> target(t+1)."""
    lags = windows.inputs[:, :, windows.layout.target_pos]
    parts = [lags]
    if windows.future_covs.shape[2]:
        parts.append(windows.future_covs[:, 0, :])
    parts.append(np.ones((windows.n_windows, 1)))
    return np.concatenate(parts, axis=1), windows.targets[:, 0]


def _ridge_solve(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Normal-equation ridge with an unpenalized trailing bias column."""
    gram = x.T @ x
    if lam > 0:
        penalty = np.full(x.shape[1], lam)
        penalty[-1] = 0.0
        gram = gram + np.diag(penalty)
    try:
        return np.linalg.solve(gram, x.T @ y)
    except np.linalg.LinAlgError:
        raise ForecastError("ill-conditioned fit (use ridge_lambda > 0)") from None


def fit(
    family: str,
    windows: WindowSet,
    val_windows: WindowSet | None = None,
    cfg: TrainConfig | None = None,
) -> ForecasterHandle:
    """Fit one model family on training windows.

    persistence / seasonal_naive need no fitting; linear families solve
    closed-form ridge systems; mlp_direct runs the Adam trainer with early
    stopping on the validation windows. Deterministic given cfg.seed.
    """
    cfg = cfg or TrainConfig()
    if windows.n_windows < 1:
        raise ForecastError("insufficient history")
    params: dict = {}
    if family == FAMILY_PERSISTENCE:
        pass
    elif family == FAMILY_SEASONAL:
        if windows.layout.input_len < SEASON_STEPS:
            raise ForecastError("input window shorter than the seasonal period")
    elif family == FAMILY_LINEAR_DIRECT:
        x = _direct_design(windows)
        params = {"coef": _ridge_solve(x, windows.targets, cfg.ridge_lambda)}
    elif family == FAMILY_LINEAR_RECURSIVE:
        x, y = _recursive_design(windows)
        params = {"coef": _ridge_solve(x, y, cfg.ridge_lambda)}
    elif family == FAMILY_MLP:
        if val_windows is None or val_windows.n_windows < 1:
            raise ForecastError("mlp_direct requires non-empty validation windows")
        params = _fit_mlp(windows, val_windows, cfg)
    else:
        raise ForecastError(f"unknown family {family!r}")
    learned = ("coef",) if family.startswith("linear") else ("w1", "b1", "w2", "b2")
    param_count = int(sum(np.asarray(params[k]).size for k in learned if k in params))
    handle = ForecasterHandle(family, cfg.seed, windows.layout, params, param_count, 0)
    return replace(handle, serialized_size=len(to_bytes(handle)))


def _fit_mlp(windows: WindowSet, val_windows: WindowSet, cfg: TrainConfig) -> dict:
    x_train = _direct_design(windows)[:, :-1]
    x_val = _direct_design(val_windows)[:, :-1]
    x_mean = x_train.mean(axis=0)
    x_sd = x_train.std(axis=0)
    x_sd[x_sd == 0.0] = 1.0
    y_mean = float(windows.targets.mean())
    y_sd = float(windows.targets.std()) or 1.0
    weights, history = mlp.train_mlp(
        (x_train - x_mean) / x_sd,
        (windows.targets - y_mean) / y_sd,
        (x_val - x_mean) / x_sd,
        (val_windows.targets - y_mean) / y_sd,
        hidden=cfg.hidden,
        seed=cfg.seed,
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.eps,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        batch_size=cfg.batch_size,
    )
    return {
        **weights,
        "x_mean": x_mean,
        "x_sd": x_sd,
        "y_mean": np.float64(y_mean),
        "y_sd": np.float64(y_sd),
        "best_epoch": np.int64(history.best_epoch),
    }


# -- prediction ---------------------------------------------------------------


def predict(handle: ForecasterHandle, windows: WindowSet) -> np.ndarray:
    """Predict [window x horizon] targets; layout must match fit time."""
    if handle.layout != windows.layout:
        raise ForecastError("schema mismatch")
    horizon = windows.layout.horizon
    if handle.family == FAMILY_PERSISTENCE:
        last = windows.inputs[:, -1, windows.layout.target_pos]
        return np.repeat(last[:, None], horizon, axis=1)
    if handle.family == FAMILY_SEASONAL:
        lags = windows.inputs[:, :, windows.layout.target_pos]
        length = windows.layout.input_len
        cols = [lags[:, length - SEASON_STEPS + (s % SEASON_STEPS)] for s in range(horizon)]
        return np.column_stack(cols)
    if handle.family == FAMILY_LINEAR_DIRECT:
        return _direct_design(windows) @ handle.params["coef"]
    if handle.family == FAMILY_LINEAR_RECURSIVE:
        return _predict_recursive(handle, windows)
    if handle.family == FAMILY_MLP:
        p = handle.params
        x = (_direct_design(windows)[:, :-1] - p["x_mean"]) / p["x_sd"]
        return mlp.forward(p, x) * float(p["y_sd"]) + float(p["y_mean"])
    if handle.family == FAMILY_PLUGIN:
        return handle.params["client"].predict(windows)
    raise ForecastError(f"unknown family {handle.family!r}")


def _predict_recursive(handle: ForecasterHandle, windows: WindowSet) -> np.ndarray:
    coef = handle.params["coef"]
    lags = windows.inputs[:, :, windows.layout.target_pos].copy()
    n_fut = windows.future_covs.shape[2]
    w = windows.n_windows
    out = np.empty((w, windows.layout.horizon))
    ones = np.ones((w, 1))
    for s in range(windows.layout.horizon):
        parts = [lags]
        if n_fut:
            parts.append(windows.future_covs[:, s, :])
        parts.append(ones)
        step = np.concatenate(parts, axis=1) @ coef
        out[:, s] = step
        lags = np.roll(lags, -1, axis=1)
        lags[:, -1] = step
    return out


# -- serialization and complexity -------------------------------------------


def to_bytes(handle: ForecasterHandle) -> bytes:
    """Serialize a handle to a byte-stable versioned JSON blob."""
    if handle.family == FAMILY_PLUGIN:
        raise ForecastError("external plugin handles are not serializable")
    params = {}
    for key, value in handle.params.items():
        arr = np.asarray(value)
        params[key] = {"shape": list(arr.shape), "dtype": arr.dtype.name, "data": arr.ravel().tolist()}
    doc = {
        "format_version": SERIALIZATION_VERSION,
        "family": handle.family,
        "seed": handle.seed,
        "param_count": handle.param_count,
        "layout": {
            "input_channels": list(handle.layout.input_channels),
            "future_channels": list(handle.layout.future_channels),
            "target": handle.layout.target,
            "input_len": handle.layout.input_len,
            "horizon": handle.layout.horizon,
        },
        "params": params,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def from_bytes(blob: bytes) -> ForecasterHandle:
    doc = json.loads(blob.decode("utf-8"))
    if doc.get("format_version") != SERIALIZATION_VERSION:
        raise ForecastError("unsupported serialization version")
    layout = Layout(
        tuple(doc["layout"]["input_channels"]),
        tuple(doc["layout"]["future_channels"]),
        doc["layout"]["target"],
        doc["layout"]["input_len"],
        doc["layout"]["horizon"],
    )
    params = {
        key: np.array(entry["data"], dtype=entry.get("dtype", "float64")).reshape(entry["shape"])
        for key, entry in doc["params"].items()
    }
    handle = ForecasterHandle(doc["family"], doc["seed"], layout, params, doc["param_count"], 0)
    return replace(handle, serialized_size=len(to_bytes(handle)))


def measure_complexity(handle: ForecasterHandle, probe: WindowSet, repeats: int = 5) -> tuple[float, int]:
    """Median wall-clock time of a full-probe prediction, plus model size.

    One warm-up call runs first so allocation and code paths are hot; the
    reported size is the serialized parameter blob in bytes.
    """
    if repeats < 5:
        raise ForecastError("repeats must be >= 5")
    predict(handle, probe)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        predict(handle, probe)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), handle.serialized_size


def random_search_mlp(
    windows: WindowSet,
    val_windows: WindowSet,
    base_cfg: TrainConfig,
    n_trials: int = 8,
    search_seed: int = 0,
    lr_grid: tuple[float, ...] = (3e-4, 1e-3, 3e-3),
    hidden_grid: tuple[int, ...] = (16, 32, 64, 128),
) -> TrainConfig:
    """Small random search replacing full hyperparameter optimization.

    Samples (lr, hidden) from the documented grids, trains each candidate
    and returns the config with the best validation MSE.
    """
    rng = derive_stream(search_seed, "random-search")
    best_cfg, best_val = base_cfg, np.inf
    for _ in range(n_trials):
        cfg = replace(
            base_cfg,
            lr=lr_grid[int(rng.random() * len(lr_grid))],
            hidden=hidden_grid[int(rng.random() * len(hidden_grid))],
        )
        handle = fit(FAMILY_MLP, windows, val_windows, cfg)
        val_mse = float(np.mean((predict(handle, val_windows) - val_windows.targets) ** 2))
        if val_mse < best_val:
            best_val, best_cfg = val_mse, cfg
    return best_cfg
