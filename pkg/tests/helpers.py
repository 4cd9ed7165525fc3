"""Hand-built telemetry frames with known, rule-silent nominal values."""

from __future__ import annotations

import numpy as np

from pdmpipe.timeseries import TimeSeriesFrame

# (sequence id, minutes) in cycle order, idle tail included
CYCLE_SEGMENTS = (
    ("S01", 15), ("S02", 15), ("S03", 15), ("S04", 15), ("S05", 15),
    ("S06", 15), ("S07", 15), ("S08", 15), ("S09", 960), ("S10", 240),
    ("S11", 1320), ("S12", 30), ("S13", 30), ("IDLE", 210),
)

UNITS = {
    "pressure_internal_a": "hPa",
    "pressure_internal_b": "hPa",
    "temp_internal": "degC",
    "temp_external_a": "degC",
    "angle_platform": "deg",
}


def quiet_frame(cycles: int = 1, segments=CYCLE_SEGMENTS,
                start: str = "2025-03-01T00:00:00") -> TimeSeriesFrame:
    """Noise-free frame on which no monitoring rule fires.

    The sampling sequence pumps down immediately (so the vacuum check is
    satisfied), heating stays under every threshold, the fan runs, and
    all valve/door logs are quiet.
    """
    seq_one = np.concatenate([np.full(mins, sid, dtype="U4")
                              for sid, mins in segments])
    per_cycle = len(seq_one)
    n = per_cycle * cycles
    sequence = np.tile(seq_one, cycles)
    cycle = np.repeat(np.arange(1, cycles + 1, dtype=np.int64), per_cycle)
    timestamps = (np.datetime64(start, "s")
                  + (np.arange(n) * 60).astype("timedelta64[s]"))

    in_s10 = sequence == "S10"
    p_a = np.full(n, 1000.0)
    p_a[in_s10] = 25.0
    channels = {
        "pressure_internal_a": p_a,
        "pressure_internal_b": np.full(n, 1005.0),
        "temp_internal": np.where(sequence == "S09", 300.0, 22.0),
        "temp_external_a": np.full(n, 22.0),
        "angle_platform": np.zeros(n),
    }
    logs = {
        "sequence_id": sequence,
        "cycle_number": cycle,
        "fault_log": np.zeros(n, dtype=np.int64),
        "valve_0001": np.zeros(n, dtype=np.int64),
        "valve_0002": np.zeros(n, dtype=np.int64),
        "brewing_fan": (sequence == "S09").astype(np.int64),
        "door_z013": np.zeros(n, dtype=np.int64),
    }
    return TimeSeriesFrame(timestamps=timestamps, channels=channels,
                           units=dict(UNITS), logs=logs, step_minutes=1)


def segment_rows(frame: TimeSeriesFrame, cycle: int, sequence_id: str) -> np.ndarray:
    """Row indices of one sequence instance."""
    return np.flatnonzero((frame.cycle == cycle)
                          & (frame.sequence == sequence_id))
