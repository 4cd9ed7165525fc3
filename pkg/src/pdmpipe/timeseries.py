"""Columnar time-series container with CSV round-trip and interval resampling.

The frame carries three kinds of columns:

- ``channels``: numeric sensor series (float64) with a unit tag each; missing
  cells are NaN and are first-class (cleaning logic branches on them),
- ``logs``: discrete series — the sequence id (S01..S13 or IDLE), the cycle
  number, and binary fault/valve/door flags,
- ``timestamps``: strictly increasing instants at a nominal fixed step.

Frames are immutable by convention: every operation returns a new frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

SEQUENCE_IDS = tuple(f"S{i:02d}" for i in range(1, 14))
IDLE = "IDLE"
SEQUENCE_VOCAB = frozenset(SEQUENCE_IDS) | {IDLE}

TIME_COL = "timestamp"
SEQUENCE_COL = "sequence_id"
CYCLE_COL = "cycle_number"


@dataclass(frozen=True)
class TimeSeriesFrame:
    """One block of telemetry: timestamps + numeric channels + discrete logs."""

    timestamps: np.ndarray                 # datetime64[s], strictly increasing
    channels: dict                         # name -> float64 array (NaN = missing)
    units: dict                            # channel name -> unit string
    logs: dict                             # name -> int64 or string array
    step_minutes: int = 1

    def __post_init__(self):
        n = len(self.timestamps)
        for name, arr in list(self.channels.items()) + list(self.logs.items()):
            if len(arr) != n:
                raise ValueError(f"column {name!r} has length {len(arr)}, expected {n}")
        missing_units = set(self.channels) - set(self.units)
        if missing_units:
            raise ValueError(f"channels without a unit tag: {sorted(missing_units)}")
        if n > 1 and not np.all(self.timestamps[1:] > self.timestamps[:-1]):
            raise ValueError("timestamps must be strictly increasing")
        if SEQUENCE_COL in self.logs:
            bad = set(np.unique(self.logs[SEQUENCE_COL])) - SEQUENCE_VOCAB
            if bad:
                raise ValueError(f"unknown sequence ids: {sorted(bad)}")
        if CYCLE_COL in self.logs and n > 1:
            cyc = self.logs[CYCLE_COL]
            if np.any(cyc[1:] < cyc[:-1]):
                raise ValueError("cycle number must be non-decreasing")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def sequence(self) -> np.ndarray:
        return self.logs[SEQUENCE_COL]

    @property
    def cycle(self) -> np.ndarray:
        return self.logs[CYCLE_COL]

    def take(self, index) -> "TimeSeriesFrame":
        """Row subset (boolean mask or index array), original order preserved."""
        return TimeSeriesFrame(
            timestamps=self.timestamps[index],
            channels={k: v[index] for k, v in self.channels.items()},
            units=dict(self.units),
            logs={k: v[index] for k, v in self.logs.items()},
            step_minutes=self.step_minutes,
        )

    def with_channel(self, name: str, values: np.ndarray, unit: str) -> "TimeSeriesFrame":
        channels = dict(self.channels)
        channels[name] = np.asarray(values, dtype=np.float64)
        units = dict(self.units)
        units[name] = unit
        return replace(self, channels=channels, units=units)

    def drop_channels(self, names) -> "TimeSeriesFrame":
        drop = set(names)
        return replace(
            self,
            channels={k: v for k, v in self.channels.items() if k not in drop},
            units={k: v for k, v in self.units.items() if k not in drop},
        )

    def elapsed_minutes(self) -> np.ndarray:
        """Minutes since the first timestamp, per row."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        delta = (self.timestamps - self.timestamps[0]).astype("timedelta64[s]")
        return delta.astype(np.int64) // 60

    def row(self, i: int) -> dict:
        """One row as a plain mapping: channels as floats, logs as int/str."""
        out = {TIME_COL: self.timestamps[i]}
        for name, arr in self.channels.items():
            out[name] = float(arr[i])
        for name, arr in self.logs.items():
            out[name] = str(arr[i]) if name == SEQUENCE_COL else int(arr[i])
        return out


@dataclass(frozen=True)
class ResamplePolicy:
    """How to aggregate each column kind into interval buckets."""

    interval_minutes: int
    numeric: str = "mean"        # {mean, last}
    flags: str = "any"           # {any, last}
    categorical: str = "last"    # {last, mode}

    def __post_init__(self):
        if self.interval_minutes <= 0:
            raise ValueError("interval must be positive")
        if self.numeric not in ("mean", "last"):
            raise ValueError(f"unknown numeric aggregator {self.numeric!r}")
        if self.flags not in ("any", "last"):
            raise ValueError(f"unknown flag aggregator {self.flags!r}")
        if self.categorical not in ("last", "mode"):
            raise ValueError(f"unknown categorical aggregator {self.categorical!r}")


def load_csv(path, schema: dict) -> TimeSeriesFrame:
    """Read telemetry CSV into a frame.

    ``schema`` maps columns to roles: ``{"channels": {name: unit}, "logs":
    [names], "step_minutes": int}``. The first column must be an ISO-8601
    timestamp named 'timestamp'. Numeric cells that fail to parse (including
    empty ones) become missing markers; log cells must parse.
    """
    channels = schema.get("channels", {})
    log_names = list(schema.get("logs", []))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        wanted = [TIME_COL] + list(channels) + log_names
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValueError(f"{path}: schema columns missing from header: {missing}")
        pos = {c: header.index(c) for c in wanted}
        rows = list(reader)

    n = len(rows)
    timestamps = np.empty(n, dtype="datetime64[s]")
    chan_data = {c: np.full(n, np.nan) for c in channels}
    log_data = {}
    for name in log_names:
        if name == SEQUENCE_COL:
            log_data[name] = np.empty(n, dtype="U4")
        else:
            log_data[name] = np.zeros(n, dtype=np.int64)

    for i, row in enumerate(rows):
        timestamps[i] = np.datetime64(row[pos[TIME_COL]])
        for c in channels:
            cell = row[pos[c]]
            try:
                chan_data[c][i] = float(cell)
            except ValueError:
                pass  # stays NaN
        for name in log_names:
            cell = row[pos[name]]
            if name == SEQUENCE_COL:
                log_data[name][i] = cell
            else:
                log_data[name][i] = int(float(cell))

    if n > 1 and not np.all(timestamps[1:] > timestamps[:-1]):
        raise ValueError(f"{path}: timestamps not strictly increasing")
    return TimeSeriesFrame(
        timestamps=timestamps,
        channels=chan_data,
        units=dict(channels),
        logs=log_data,
        step_minutes=int(schema.get("step_minutes", 1)),
    )


def write_csv(frame: TimeSeriesFrame, path) -> dict:
    """Write a frame to CSV; returns the schema that round-trips it."""
    names = list(frame.channels) + list(frame.logs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([TIME_COL] + names)
        iso = np.datetime_as_string(frame.timestamps, unit="s")
        cols = [frame.channels[c] for c in frame.channels] + [frame.logs[c] for c in frame.logs]
        for i in range(len(frame)):
            row = [iso[i]]
            for col in cols:
                v = col[i]
                if isinstance(v, np.floating):
                    row.append("" if np.isnan(v) else repr(float(v)))
                else:
                    row.append(str(v))
            writer.writerow(row)
    return {
        "channels": dict(frame.units),
        "logs": list(frame.logs),
        "step_minutes": frame.step_minutes,
    }


def _bucket_last(values, ends):
    return values[ends - 1]


def resample(frame: TimeSeriesFrame, policy: ResamplePolicy) -> TimeSeriesFrame:
    """Aggregate the frame into fixed buckets anchored at its first timestamp.

    Numeric channels use the policy's numeric aggregator (means skip missing
    cells; an all-missing bucket stays missing). Binary logs use the flag
    aggregator (any-one by default, so a fault pulse anywhere in a bucket
    survives). The sequence id uses the categorical aggregator; the cycle
    number always takes the bucket's last value.

    One output row is emitted per non-empty bucket. On gap-free input the
    output length is exactly ceil(span / interval) with span = (last - first)
    + native step; buckets emptied by prior row deletion are skipped rather
    than fabricating rows with undefined sequence context.
    """
    if len(frame) == 0:
        raise ValueError("cannot resample an empty frame")
    if policy.interval_minutes % frame.step_minutes != 0:
        raise ValueError(
            f"interval {policy.interval_minutes} min is not a multiple of the "
            f"native step {frame.step_minutes} min"
        )

    offsets = frame.elapsed_minutes()
    bucket_of_row = offsets // policy.interval_minutes
    bucket_ids, starts = np.unique(bucket_of_row, return_index=True)
    ends = np.append(starts[1:], len(frame))

    out_ts = frame.timestamps[0] + (bucket_ids * policy.interval_minutes).astype("timedelta64[m]")

    out_channels = {}
    for name, values in frame.channels.items():
        if policy.numeric == "last":
            out_channels[name] = _bucket_last(values, ends)
        else:
            ok = ~np.isnan(values)
            sums = np.add.reduceat(np.where(ok, values, 0.0), starts)
            counts = np.add.reduceat(ok.astype(np.float64), starts)
            with np.errstate(invalid="ignore"):
                out_channels[name] = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    out_logs = {}
    for name, values in frame.logs.items():
        if name == SEQUENCE_COL:
            if policy.categorical == "mode":
                agg = np.empty(len(bucket_ids), dtype=values.dtype)
                for j, (s, e) in enumerate(zip(starts, ends)):
                    vals, counts = np.unique(values[s:e], return_counts=True)
                    agg[j] = vals[np.argmax(counts)]  # ties -> smallest value
                out_logs[name] = agg
            else:
                out_logs[name] = _bucket_last(values, ends)
        elif name == CYCLE_COL:
            out_logs[name] = _bucket_last(values, ends)
        else:
            if policy.flags == "any":
                out_logs[name] = np.maximum.reduceat(values, starts)
            else:
                out_logs[name] = _bucket_last(values, ends)

    return TimeSeriesFrame(
        timestamps=out_ts.astype("datetime64[s]"),
        channels=out_channels,
        units=dict(frame.units),
        logs=out_logs,
        step_minutes=policy.interval_minutes,
    )


def slice_by_sequence(frame: TimeSeriesFrame, keep) -> TimeSeriesFrame:
    """Rows whose sequence id is in ``keep``; order and cycle grouping kept."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep set must be non-empty")
    mask = np.isin(frame.sequence, sorted(keep))
    return frame.take(mask)
