"""Uniformly sampled multichannel time-series frames and preprocessing.

A :class:`TimeSeriesFrame` is the universe every other stage operates on:
an hourly (by default) grid of float64 values, one column per channel,
with NaN as the missing sentinel. Timestamps are implicit, derived from
``start_time`` and ``step_hours``, so frames are gap-free by construction.

Frames are immutable after construction; all operations return new frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import yaml

ROLES = ("target", "past_covariate", "future_covariate", "imputation_indicator")
IMPUTED_SUFFIX = "__imputed"
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class FrameError(ValueError):
    """Raised when a frame operation violates its contract."""


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class ChannelSpec:
    """Name, role and unit of one column."""

    name: str
    role: str = "past_covariate"
    unit: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise FrameError(f"unknown channel role {self.role!r}")


@dataclass(frozen=True)
class ChronoSplit:
    """Chronological split boundaries; the test segment runs to the frame end."""

    train_end: datetime
    val_end: datetime

    def __post_init__(self):
        if self.train_end >= self.val_end:
            raise FrameError("split out of range")


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Immutable [time x channel] table with an implicit hourly time axis."""

    start_time: datetime
    step_hours: float
    channels: tuple[ChannelSpec, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.start_time.tzinfo is None:
            raise FrameError("start_time must be timezone-aware UTC")
        if self.step_hours <= 0:
            raise FrameError("step must be positive")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != len(self.channels):
            raise FrameError("values must be 2-D [time x channel]")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channels", tuple(self.channels))
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise FrameError("channel names must be unique")
        for spec in self.channels:
            if spec.role == "imputation_indicator":
                base = spec.name.removesuffix(IMPUTED_SUFFIX)
                if base == spec.name or base not in names:
                    raise FrameError(
                        f"indicator {spec.name!r} must be named <channel>{IMPUTED_SUFFIX} "
                        "for an existing channel"
                    )
                col = vals[:, names.index(spec.name)]
                if not np.all((col == 0.0) | (col == 1.0)):
                    raise FrameError(f"indicator {spec.name!r} must contain only 0/1")

    # -- basic accessors ------------------------------------------------

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def step(self) -> timedelta:
        return timedelta(hours=self.step_hours)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise FrameError(f"no such channel: {name!r}") from None

    def spec(self, name: str) -> ChannelSpec:
        return self.channels[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def time_at(self, i: int) -> datetime:
        return self.start_time + i * self.step

    @property
    def end_time(self) -> datetime:
        return self.time_at(self.length - 1)

    @property
    def target_name(self) -> str:
        targets = [c.name for c in self.channels if c.role == "target"]
        if len(targets) != 1:
            raise FrameError(f"frame must have exactly one target channel, found {len(targets)}")
        return targets[0]

    def indicator_for(self, name: str) -> str | None:
        """Name of the imputation-indicator channel for ``name``, if present."""
        candidate = name + IMPUTED_SUFFIX
        return candidate if candidate in self.names else None

    # -- functional updates ----------------------------------------------

    def with_column(self, name: str, column: np.ndarray) -> TimeSeriesFrame:
        vals = self.values.copy()
        vals[:, self.index(name)] = column
        return replace(self, values=vals)

    def with_channel(self, spec: ChannelSpec, column: np.ndarray) -> TimeSeriesFrame:
        vals = np.column_stack([self.values, np.asarray(column, dtype=np.float64)])
        return replace(self, channels=self.channels + (spec,), values=vals)

    def with_roles(self, roles: dict[str, str], units: dict[str, str] | None = None) -> TimeSeriesFrame:
        units = units or {}
        specs = tuple(
            ChannelSpec(c.name, roles.get(c.name, c.role), units.get(c.name, c.unit))
            for c in self.channels
        )
        return replace(self, channels=specs)

    def slice_rows(self, lo: int, hi: int) -> TimeSeriesFrame:
        if not 0 <= lo < hi <= self.length:
            raise FrameError("row slice out of range")
        return replace(self, start_time=self.time_at(lo), values=self.values[lo:hi])


# -- preprocessing operations -------------------------------------------


def resample_hourly(events: list[tuple[datetime, str, float]]) -> TimeSeriesFrame:
    """Aggregate irregular sensor events onto an hourly grid.

    Each event is assigned to its nearest full-hour mark (ties at exactly
    30 minutes go to the later hour) and the events of one channel landing
    on the same mark are averaged. Hours with no contributing event are
    missing. Channels are ordered by first appearance.
    """
    if not events:
        raise FrameError("no data")
    channel_order: list[str] = []
    per_cell: dict[tuple[int, str], list[float]] = {}
    hours: list[int] = []
    for ts, channel, value in events:
        if ts.tzinfo is None:
            raise FrameError("event timestamps must be timezone-aware UTC")
        if not math.isfinite(value):
            raise FrameError("invalid reading")
        if channel not in channel_order:
            channel_order.append(channel)
        epoch_hours = (ts - datetime(1970, 1, 1, tzinfo=timezone.utc)).total_seconds() / 3600.0
        nearest = math.floor(epoch_hours + 0.5)
        hours.append(nearest)
        per_cell.setdefault((nearest, channel), []).append(float(value))

    lo, hi = min(hours), max(hours)
    n = hi - lo + 1
    values = np.full((n, len(channel_order)), np.nan)
    for (hour, channel), cell_values in per_cell.items():
        values[hour - lo, channel_order.index(channel)] = float(np.mean(cell_values))
    start = datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(hours=lo)
    return TimeSeriesFrame(
        start_time=start,
        step_hours=1.0,
        channels=tuple(ChannelSpec(name) for name in channel_order),
        values=values,
    )


def interpolate_missing(frame: TimeSeriesFrame, channels: list[str] | None = None) -> TimeSeriesFrame:
    """Fill gaps by linear interpolation and append 0/1 indicator channels.

    Interior gaps are interpolated between the nearest observed neighbours;
    leading/trailing gaps take the nearest observed value. Observed cells are
    left bit-identical. For every processed channel a ``<name>__imputed``
    indicator channel is appended, 1 exactly where a cell was filled.
    """
    if channels is None:
        channels = [c.name for c in frame.channels if c.role != "imputation_indicator"]
    out = frame
    for name in channels:
        col = frame.column(name)
        missing = np.isnan(col)
        known = np.flatnonzero(~missing)
        if known.size < 2:
            raise FrameError(f"underdetermined channel: {name!r}")
        filled = col.copy()
        gaps = np.flatnonzero(missing)
        if gaps.size:
            # np.interp clamps outside the observed range, which is exactly
            # the nearest-value extension wanted for leading/trailing gaps.
            filled[gaps] = np.interp(gaps, known, col[known])
        out = out.with_column(name, filled)
        out = out.with_channel(
            ChannelSpec(name + IMPUTED_SUFFIX, "imputation_indicator"),
            missing.astype(np.float64),
        )
    return out


def split(frame: TimeSeriesFrame, boundaries: ChronoSplit) -> tuple[TimeSeriesFrame, TimeSeriesFrame, TimeSeriesFrame]:
    """Partition rows chronologically into (train, val, test).

    A row belongs to train while its timestamp is before ``train_end``, to
    val before ``val_end``, and to test otherwise. Boundaries must lie
    strictly inside the frame and leave all three segments non-empty.
    """
    if not (frame.start_time < boundaries.train_end < boundaries.val_end < frame.end_time):
        raise FrameError("split out of range")
    step_seconds = frame.step.total_seconds()
    i_train = math.ceil((boundaries.train_end - frame.start_time).total_seconds() / step_seconds)
    i_val = math.ceil((boundaries.val_end - frame.start_time).total_seconds() / step_seconds)
    if not (0 < i_train < i_val < frame.length):
        raise FrameError("split out of range")
    return (
        frame.slice_rows(0, i_train),
        frame.slice_rows(i_train, i_val),
        frame.slice_rows(i_val, frame.length),
    )


def make_placeholder_future(frame: TimeSeriesFrame, horizon: int) -> TimeSeriesFrame:
    """Append the shifted-target placeholder used as a stand-in future covariate.

    The placeholder p satisfies p(t) = target(t - horizon); the first
    ``horizon`` cells, undefined by the shift, take the earliest defined
    value (nearest-value extension).
    """
    if horizon < 1:
        raise FrameError("horizon must be >= 1")
    if horizon >= frame.length:
        raise FrameError("horizon too long")
    target = frame.column(frame.target_name)
    placeholder = np.empty(frame.length)
    placeholder[horizon:] = target[: frame.length - horizon]
    placeholder[:horizon] = target[0]
    name = frame.target_name + "__placeholder"
    return frame.with_channel(ChannelSpec(name, "future_covariate"), placeholder)


def placeholder_name(frame: TimeSeriesFrame) -> str:
    return frame.target_name + "__placeholder"


# -- file formats ---------------------------------------------------------


def _format_value(v: float) -> str:
    if np.isnan(v):
        return ""
    return repr(float(v))


def write_csv(frame: TimeSeriesFrame, path: str | Path) -> None:
    """Write the canonical CSV form: ISO-8601 UTC timestamps, empty = missing."""
    lines = ["timestamp," + ",".join(frame.names)]
    for i in range(frame.length):
        row = frame.values[i]
        lines.append(format_timestamp(frame.time_at(i)) + "," + ",".join(_format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: str | Path, roles: dict[str, str] | None = None) -> TimeSeriesFrame:
    """Read a canonical CSV back into a frame.

    Timestamps must form a uniform, strictly increasing grid. Channel roles
    default to past_covariate unless supplied (typically from the sidecar
    schema, see :func:`read_schema`).
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise FrameError("no data")
    header = lines[0].split(",")
    if header[0] != "timestamp":
        raise FrameError("first CSV column must be 'timestamp'")
    names = header[1:]
    stamps: list[datetime] = []
    rows: list[list[float]] = []
    for ln in lines[1:]:
        parts = ln.split(",")
        stamps.append(parse_timestamp(parts[0]))
        rows.append([float(p) if p else np.nan for p in parts[1:]])
    if not rows:
        raise FrameError("no data")
    if len(stamps) > 1:
        steps = {(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])}
        if len(steps) != 1 or min(steps) <= 0:
            raise FrameError("timestamps must form a uniform increasing grid")
        step_hours = steps.pop() / 3600.0
    else:
        step_hours = 1.0
    roles = roles or {}
    channels = tuple(ChannelSpec(n, roles.get(n, "past_covariate")) for n in names)
    return TimeSeriesFrame(stamps[0], step_hours, channels, np.array(rows))


def write_schema(frame: TimeSeriesFrame, path: str | Path) -> None:
    """Write the sidecar schema mapping channel name -> role (and unit)."""
    doc = {}
    for c in frame.channels:
        doc[c.name] = {"role": c.role, "unit": c.unit} if c.unit else c.role
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def read_schema(path: str | Path) -> tuple[dict[str, str], dict[str, str]]:
    """Read a sidecar schema; returns (roles, units) keyed by channel name."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    roles, units = {}, {}
    for name, entry in doc.items():
        if isinstance(entry, dict):
            roles[name] = entry.get("role", "past_covariate")
            units[name] = entry.get("unit", "")
        else:
            roles[name] = str(entry)
    return roles, units


def load_dataset(csv_path: str | Path, schema_path: str | Path | None = None) -> TimeSeriesFrame:
    """Read a CSV plus its sidecar schema (defaults to <csv>.schema.yaml)."""
    csv_path = Path(csv_path)
    if schema_path is None:
        candidate = csv_path.with_suffix(".schema.yaml")
        schema_path = candidate if candidate.exists() else None
    if schema_path is not None:
        roles, units = read_schema(schema_path)
        return read_csv(csv_path, roles).with_roles(roles, units)
    return read_csv(csv_path)
