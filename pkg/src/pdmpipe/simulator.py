"""Synthetic telemetry generator for the cyclic sampling equipment.

Signals are piecewise-deterministic per sequence plus white noise and a
slow AR(1) wander. Injected faults reproduce exactly the symptom each
monitoring rule watches, with clipped margins wide enough that the rule
engine fires on every injected event and never on a nominal cycle.

The automation layer under-reports: each fault carries a latent magnitude,
and only faults whose magnitude clears a quantile gate make it into the
automation fault log (so the marginal logging rate equals the configured
probability). Logged events pulse the shared ``fault_log`` channel from
onset until their sequence restarts. Ground truth records every event,
logged or not, plus injected gaps and outliers, and is the oracle the
test suite checks the pipeline against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from ._seeding import substream
from .knowledge import (
    SOURCE_GROUND_TRUTH,
    FaultEvent,
    KnowledgeBase,
)
from .timeseries import IDLE, SEQUENCE_IDS, TimeSeriesFrame

log = logging.getLogger(__name__)

CHANNEL_UNITS = {
    "pressure_internal_a": "hPa",
    "pressure_internal_b": "hPa",
    "temp_internal": "degC",
    "temp_external_a": "degC",
    "temp_external_b": "degC",
    "temp_external_c": "degC",
    "temp_external_d": "degC",
    "temp_external_e": "degC",
    "angle_platform": "deg",
}

LOG_NAMES = ("sequence_id", "cycle_number", "fault_log",
             "valve_0001", "valve_0002", "brewing_fan", "door_z013")

FAULT_LOG = "fault_log"

# fault key -> (fault name, cause, sequence, onset offset in minutes from
# sequence start; None = drawn per cycle)
FAULT_KINDS = {
    "needle": ("Needle Valve Fault", "needle valve clogging", "S10", 5),
    "sample": ("Sample Taking Fault", "sampling valve actuation failure", "S10", 0),
    "heating_temp": ("Heating Fault", "thermal regulation drift", "S09", 890),
    "heating_pressure": ("Heating Fault", "brewing fan failure", "S09", 610),
    "angle": ("Angle Measurement Fault", "platform inclination shift", "S10", 0),
    "door": ("Door Closure Fault", "door left open", "S04", None),
}
BLOCKING_KEYS = ("needle", "sample", "heating_temp", "heating_pressure", "angle")

DEFAULT_INJECTION = {
    "needle": 0.30,
    "sample": 0.10,
    "heating_temp": 0.12,
    "heating_pressure": 0.10,
    "angle": 0.10,
    "door": 0.15,
}

# white noise scale per channel
DEFAULT_NOISE = {
    "pressure_internal_a": 5.0,
    "pressure_internal_b": 4.0,
    "temp_internal": 1.5,
    "temp_external_a": 0.8,
    "temp_external_b": 0.8,
    "temp_external_c": 0.8,
    "temp_external_d": 5.0,
    "temp_external_e": 0.8,
    "angle_platform": 0.8,
}

# AR(1) wander innovation scale per channel
DEFAULT_WANDER = {
    "pressure_internal_a": 1.5,
    "pressure_internal_b": 1.0,
    "temp_internal": 0.45,
    "temp_external_a": 0.25,
    "temp_external_b": 0.25,
    "temp_external_c": 0.25,
    "temp_external_d": 0.25,
    "temp_external_e": 0.25,
    "angle_platform": 0.15,
}

MISSING_CAUSES = ("BlanketMaintenance", "SingleSensorDropout", "NonUse")
OUTLIER_KINDS = ("FalseSpike", "TruePrecursorRelevant", "TrueIrrelevant")

# degradation magnitude is uniform on [MU_LOW, 1]
MU_LOW = 0.35
# precursor amplitudes; the ramp scales with magnitude, the shift does not
SHIFT_PRESSURE_B = 90.0          # whole-cycle baseline shift, hPa
RAMP_EXT_D_PER_MU = 45.0         # pre-onset ramp on temp_external_d, degC per unit mu
RAMP_MINUTES = 150


@dataclass(frozen=True)
class SimConfig:
    """Everything the generator needs; a fixed seed fixes every byte."""

    seed: int
    cycles: int = 55
    step_minutes: int = 1
    idle_minutes: int = 210
    start: str = "2025-01-05T00:00:00"
    durations: dict = None                  # sequence id -> minutes; None = KB defaults
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    wander: dict = field(default_factory=lambda: dict(DEFAULT_WANDER))
    wander_phi: float = 0.97
    injection: dict = field(default_factory=lambda: dict(DEFAULT_INJECTION))
    schedule: tuple = None                  # ((cycle, fault key), ...) overrides injection
    logging_probability: float = 0.25
    logging_model: str = "magnitude"        # {magnitude, bernoulli}

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not 0.0 <= self.logging_probability <= 1.0:
            raise ValueError("logging probability must be in [0, 1]")
        if self.logging_model not in ("magnitude", "bernoulli"):
            raise ValueError(f"unknown logging model {self.logging_model!r}")
        for key, p in self.injection.items():
            if key not in FAULT_KINDS:
                raise ValueError(f"unknown fault key {key!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"injection probability for {key!r} must be in [0, 1]")
        if self.schedule is not None:
            for cycle, key in self.schedule:
                if key not in FAULT_KINDS:
                    raise ValueError(f"schedule references unknown fault key {key!r}")
                if not 1 <= cycle <= self.cycles:
                    raise ValueError(f"schedule cycle {cycle} out of range")


@dataclass(frozen=True)
class GtEvent:
    """A ground-truth fault occurrence with its reporting fate."""

    event: FaultEvent
    logged: bool
    magnitude: float

    def to_dict(self) -> dict:
        return {"event": self.event.to_dict(), "logged": self.logged,
                "magnitude": self.magnitude}

    @classmethod
    def from_dict(cls, d: dict) -> "GtEvent":
        return cls(FaultEvent.from_dict(d["event"]), bool(d["logged"]),
                   float(d["magnitude"]))


@dataclass(frozen=True)
class MissingInterval:
    start: np.datetime64
    end: np.datetime64            # inclusive row range [start, end]
    cause: str
    channel: str = None           # None = every channel

    def __post_init__(self):
        if self.cause not in MISSING_CAUSES:
            raise ValueError(f"unknown missing cause {self.cause!r}")

    def to_dict(self) -> dict:
        return {"start": str(np.datetime_as_string(self.start, unit="s")),
                "end": str(np.datetime_as_string(self.end, unit="s")),
                "cause": self.cause, "channel": self.channel}

    @classmethod
    def from_dict(cls, d: dict) -> "MissingInterval":
        return cls(np.datetime64(d["start"], "s"), np.datetime64(d["end"], "s"),
                   d["cause"], d.get("channel"))


@dataclass(frozen=True)
class OutlierPoint:
    timestamp: np.datetime64
    channel: str
    kind: str
    value: float
    original: float

    def __post_init__(self):
        if self.kind not in OUTLIER_KINDS:
            raise ValueError(f"unknown outlier kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"timestamp": str(np.datetime_as_string(self.timestamp, unit="s")),
                "channel": self.channel, "kind": self.kind,
                "value": self.value, "original": self.original}

    @classmethod
    def from_dict(cls, d: dict) -> "OutlierPoint":
        return cls(np.datetime64(d["timestamp"], "s"), d["channel"], d["kind"],
                   float(d["value"]), float(d["original"]))


@dataclass(frozen=True)
class GroundTruth:
    """Oracle record of everything the generator injected."""

    events: tuple = ()
    missing: tuple = ()
    outliers: tuple = ()

    def logged_events(self) -> list:
        return [g for g in self.events if g.logged]

    def blocking_events(self) -> list:
        return [g for g in self.events if g.event.severity == "Blocking"]

    def to_dict(self) -> dict:
        return {
            "events": [g.to_dict() for g in self.events],
            "missing": [m.to_dict() for m in self.missing],
            "outliers": [o.to_dict() for o in self.outliers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            events=tuple(GtEvent.from_dict(g) for g in d.get("events", [])),
            missing=tuple(MissingInterval.from_dict(m) for m in d.get("missing", [])),
            outliers=tuple(OutlierPoint.from_dict(o) for o in d.get("outliers", [])),
        )


class CycleLayout:
    """Minute offsets of every sequence within one cycle, idle included."""

    def __init__(self, durations: dict, idle_minutes: int):
        self.start = {}
        self.end = {}
        offset = 0
        for seq in SEQUENCE_IDS:
            self.start[seq] = offset
            offset += int(durations[seq])
            self.end[seq] = offset
        self.active_minutes = offset
        self.idle_minutes = int(idle_minutes)
        self.total_minutes = offset + self.idle_minutes
        codes = np.empty(self.total_minutes, dtype="U4")
        for seq in SEQUENCE_IDS:
            codes[self.start[seq]:self.end[seq]] = seq
        codes[self.active_minutes:] = IDLE
        self.sequence_of_minute = codes


def _wander(gen: np.random.Generator, n: int, scale: float, phi: float) -> np.ndarray:
    if scale <= 0:
        return np.zeros(n)
    innovations = gen.standard_normal(n) * scale
    return lfilter([1.0], [1.0, -phi], innovations)


def _ramp(m: np.ndarray, onset: int, amplitude: float, hold_until: int) -> np.ndarray:
    """Linear rise over RAMP_MINUTES before ``onset``, held until ``hold_until``."""
    rise = np.clip((m - (onset - RAMP_MINUTES)) / RAMP_MINUTES, 0.0, 1.0)
    out = amplitude * rise
    out[m >= hold_until] = 0.0
    return out


def simulate(config: SimConfig, kb: KnowledgeBase):
    """Generate (telemetry frame, ground truth) for the configured run."""
    durations = config.durations or kb.mode_model.durations
    layout = CycleLayout(durations, config.idle_minutes)
    if config.step_minutes != 1:
        raise ValueError("only 1-minute native sampling is supported")

    cycles = config.cycles
    total = layout.total_minutes
    n = cycles * total
    seed = config.seed

    t0 = np.datetime64(config.start, "s")
    timestamps = t0 + (np.arange(n) * 60).astype("timedelta64[s]")
    sequence = np.tile(layout.sequence_of_minute, cycles)
    cycle_number = np.repeat(np.arange(1, cycles + 1, dtype=np.int64), total)
    m = np.tile(np.arange(total, dtype=np.int64), cycles)   # minute within cycle

    # --- fault draws ---------------------------------------------------
    injected = {}
    if config.schedule is not None:
        for key in FAULT_KINDS:
            injected[key] = np.zeros(cycles, dtype=bool)
        for cycle, key in config.schedule:
            injected[key][cycle - 1] = True
    else:
        for key in FAULT_KINDS:
            p = config.injection.get(key, 0.0)
            injected[key] = substream(seed, "inject", key).random(cycles) < p

    mu_cycle = MU_LOW + (1 - MU_LOW) * substream(seed, "magnitude").random(cycles)
    door_mu = MU_LOW + (1 - MU_LOW) * substream(seed, "door-magnitude").random(cycles)
    door_minute = substream(seed, "door-minute").integers(1, 9, cycles)
    valve_pick = substream(seed, "valve-pick").integers(0, 2, cycles)

    any_blocking = np.zeros(cycles, dtype=bool)
    for key in BLOCKING_KEYS:
        any_blocking |= injected[key]

    def per_row(flags: np.ndarray) -> np.ndarray:
        return np.repeat(flags, total)

    row_fault = {key: per_row(injected[key]) for key in FAULT_KINDS}
    row_blocking = per_row(any_blocking)
    row_mu = np.repeat(mu_cycle, total)

    s9a, s9b = layout.start["S09"], layout.end["S09"]
    s10a, s10b = layout.start["S10"], layout.end["S10"]
    s11a, s11b = layout.start["S11"], layout.end["S11"]
    active_end = layout.active_minutes

    in_s09 = (m >= s9a) & (m < s9b)
    in_s10 = (m >= s10a) & (m < s10b)
    in_s11 = (m >= s11a) & (m < s11b)
    in_tail = (m >= s11b) & (m < active_end)
    in_prep = m < s9a
    in_idle = m >= active_end
    m9 = m - s9a
    m10 = m - s10a
    m11 = m - s11a

    # --- internal temperature -------------------------------------------
    heat_hot = row_fault["heating_temp"]
    plateau = np.where(heat_hot, 322.0, 300.0)
    t_int = np.full(n, 22.0)
    ramp9 = 22.0 + 278.0 * np.minimum(m9 / 120.0, 1.0)
    t_int[in_s09] = np.where(heat_hot & (m9 >= 890), 322.0, np.minimum(ramp9, 300.0))[in_s09]
    t_int[in_s10] = plateau[in_s10]
    t_int[in_s11] = (22.0 + (plateau - 22.0) * np.exp(-m11 / 300.0))[in_s11]
    t_int[in_tail] = 24.0

    # --- internal pressures ----------------------------------------------
    p_a = np.full(n, 1000.0)
    p_a[in_s09] = (1000.0 + 1950.0 * np.minimum(m9 / 480.0, 1.0))[in_s09]
    p_a[in_s09 & row_fault["heating_pressure"] & (m9 >= 610)] = 3200.0
    vacuum = 25.0 + 975.0 * np.exp(-np.maximum(m10, 0) / 0.7)
    p_a[in_s10] = np.where(row_fault["needle"], 750.0, vacuum)[in_s10]

    # secondary loop holds reservoir pressure; runs high on degraded cycles
    p_b = np.full(n, 1005.0)
    p_b += np.where(row_blocking & (m < active_end), SHIFT_PRESSURE_B, 0.0)

    onset_minute = {
        "needle": s10a + 5,
        "sample": s10a + 0,
        "heating_temp": s9a + 890,
        "heating_pressure": s9a + 610,
        "angle": s10a + 0,
    }
    # magnitude-scaled pre-onset ramp, held until the cycle aborts
    ramp_total = np.zeros(n)
    for key in BLOCKING_KEYS:
        contribution = _ramp(m, onset_minute[key], RAMP_EXT_D_PER_MU, s10b)
        contribution *= row_mu * row_fault[key]
        np.maximum(ramp_total, contribution, out=ramp_total)

    # --- external casing temperatures -------------------------------------
    t_nominal = np.full(n, 22.0)
    t_nominal[in_s09] = np.minimum(ramp9, 300.0)[in_s09]
    t_nominal[in_s10] = 300.0
    t_nominal[in_s11] = (22.0 + 278.0 * np.exp(-m11 / 300.0))[in_s11]
    t_nominal[in_tail] = 24.0
    follow = {"temp_external_a": 0.10, "temp_external_b": 0.12,
              "temp_external_c": 0.08, "temp_external_d": 0.11,
              "temp_external_e": 0.12}
    ext = {name: 22.0 + k * (t_nominal - 22.0) for name, k in follow.items()}
    ext["temp_external_d"] = ext["temp_external_d"] + ramp_total

    # --- platform angle ---------------------------------------------------
    angle = np.zeros(n)
    angle[in_s10 & row_fault["angle"]] = 46.0

    # --- noise, wander, clips ----------------------------------------------
    base = {
        "pressure_internal_a": p_a,
        "pressure_internal_b": p_b,
        "temp_internal": t_int,
        "temp_external_a": ext["temp_external_a"],
        "temp_external_b": ext["temp_external_b"],
        "temp_external_c": ext["temp_external_c"],
        "temp_external_d": ext["temp_external_d"],
        "temp_external_e": ext["temp_external_e"],
        "angle_platform": angle,
    }
    twin_shared = substream(seed, "noise-shared-be").standard_normal(n)
    channels = {}
    for name in CHANNEL_UNITS:
        white = substream(seed, "noise", name).standard_normal(n) * config.noise[name]
        if name in ("temp_external_b", "temp_external_e"):
            # redundancy twins share most of their noise
            white = 0.9 * config.noise[name] * twin_shared + 0.35 * white
        drift = _wander(substream(seed, "wander", name), n,
                        config.wander.get(name, 0.0), config.wander_phi)
        channels[name] = base[name] + white + drift

    # hard margins so rule firing matches injection exactly
    pa = channels["pressure_internal_a"]
    needle_rows = in_s10 & row_fault["needle"]
    pa[needle_rows] = np.maximum(pa[needle_rows], 700.0)
    memory_rows = in_s10 & ~row_fault["needle"] & (m10 >= 3)
    pa[memory_rows] = np.minimum(pa[memory_rows], 46.0)
    hp_rows = in_s09 & row_fault["heating_pressure"] & (m9 >= 610)
    pa[hp_rows] = np.maximum(pa[hp_rows], 3160.0)
    pa[in_s09 & ~(row_fault["heating_pressure"] & (m9 >= 610))] = np.minimum(
        pa[in_s09 & ~(row_fault["heating_pressure"] & (m9 >= 610))], 3100.0)

    ti = channels["temp_internal"]
    hot_rows = in_s09 & heat_hot & (m9 >= 890)
    ti[hot_rows] = np.maximum(ti[hot_rows], 318.0)
    cool_rows = in_s09 & ~(heat_hot & (m9 >= 890))
    ti[cool_rows] = np.minimum(ti[cool_rows], 312.0)

    ang = channels["angle_platform"]
    bad_rows = in_s10 & row_fault["angle"]
    ang[bad_rows] = np.maximum(ang[bad_rows], 44.0)
    ok_rows = in_s10 & ~row_fault["angle"]
    ang[ok_rows] = np.clip(ang[ok_rows], -25.0, 35.0)

    # --- discrete logs ------------------------------------------------------
    fan = in_s09.astype(np.int64)
    fan[in_s09 & row_fault["heating_pressure"] & (m9 >= 600)] = 0

    valve1 = np.zeros(n, dtype=np.int64)
    valve2 = np.zeros(n, dtype=np.int64)
    stuck = in_s10 & row_fault["sample"] & (m10 < 5)
    pick = np.repeat(valve_pick, total)
    valve1[stuck & (pick == 0)] = 1
    valve2[stuck & (pick == 1)] = 1

    s4a = layout.start["S04"]
    door = np.zeros(n, dtype=np.int64)
    row_door_minute = np.repeat(door_minute, total)
    door_open = per_row(injected["door"]) & (m >= s4a + row_door_minute) & \
        (m < s4a + row_door_minute + 8)
    door[door_open] = 1

    # --- ground-truth events and fault log ----------------------------------
    if config.logging_probability >= 1.0:
        gate = MU_LOW - 1.0   # everything clears
    else:
        gate = MU_LOW + (1 - MU_LOW) * (1.0 - config.logging_probability)

    seq_end_of = {"needle": s10b, "sample": s10b, "angle": s10b,
                  "heating_temp": s9b, "heating_pressure": s9b}
    fault_pulse = np.zeros(n, dtype=np.int64)
    gt_events = []
    for c in range(1, cycles + 1):
        offset = (c - 1) * total
        for key in FAULT_KINDS:
            if not injected[key][c - 1]:
                continue
            name, cause, seq, onset_off = FAULT_KINDS[key]
            if key == "door":
                onset = s4a + int(door_minute[c - 1])
                mu = float(door_mu[c - 1])
                pulse_end = layout.end["S04"]
            else:
                onset = onset_minute[key]
                mu = float(mu_cycle[c - 1])
                pulse_end = seq_end_of[key]
            if config.logging_model == "bernoulli":
                logged = bool(substream(seed, "logging", key, c).random()
                              < config.logging_probability)
                if config.logging_probability >= 1.0:
                    logged = True
            else:
                logged = mu > gate
            entry = kb.entry(name)
            gt_events.append(GtEvent(
                event=FaultEvent(
                    onset=timestamps[offset + onset],
                    cycle=c,
                    sequence_id=seq,
                    fault_name=name,
                    cause=cause,
                    severity=entry.severity,
                    consequence=entry.consequence,
                    source=SOURCE_GROUND_TRUTH,
                ),
                logged=logged,
                magnitude=mu,
            ))
            if logged:
                fault_pulse[offset + onset:offset + pulse_end] = 1

    frame = TimeSeriesFrame(
        timestamps=timestamps,
        channels=channels,
        units=dict(CHANNEL_UNITS),
        logs={
            "sequence_id": sequence,
            "cycle_number": cycle_number,
            FAULT_LOG: fault_pulse,
            "valve_0001": valve1,
            "valve_0002": valve2,
            "brewing_fan": fan,
            "door_z013": door,
        },
        step_minutes=1,
    )
    truth = GroundTruth(events=tuple(gt_events))
    log.info("simulated %d cycles: %d events (%d logged)",
             cycles, len(gt_events), len(truth.logged_events()))
    return frame, truth


def inject_missing(frame: TimeSeriesFrame, gt: GroundTruth, scenario: dict):
    """Blank cells per the missing-data scenario and record the intervals.

    Scenario keys: ``non_use`` (blank every idle stretch), ``blanket``
    (rows with every channel blanked), ``dropout`` (one channel blanked).
    Blanket intervals must not overlap. Minutes are relative to the start
    of the named cycle.
    """
    if not scenario:
        return frame, gt
    channels = {k: v.copy() for k, v in frame.channels.items()}
    intervals = list(gt.missing)
    cyc = frame.cycle
    minutes = frame.elapsed_minutes()

    def rows_for(cycle: int, start_minute: int, length: int) -> np.ndarray:
        base = np.flatnonzero(cyc == cycle)
        if base.size == 0:
            raise ValueError(f"missing scenario references absent cycle {cycle}")
        first = minutes[base[0]]
        lo = first + start_minute
        hi = lo + length
        rows = base[(minutes[base] >= lo) & (minutes[base] < hi)]
        if rows.size == 0:
            raise ValueError(f"missing interval outside frame span (cycle {cycle})")
        return rows

    blanket_spans = []
    for spec in scenario.get("blanket", ()):
        rows = rows_for(int(spec["cycle"]), int(spec["start_minute"]), int(spec["minutes"]))
        span = (rows[0], rows[-1])
        for other in blanket_spans:
            if span[0] <= other[1] and other[0] <= span[1]:
                raise ValueError("blanket maintenance intervals overlap")
        blanket_spans.append(span)
        for name in channels:
            channels[name][rows] = np.nan
        intervals.append(MissingInterval(
            start=frame.timestamps[rows[0]], end=frame.timestamps[rows[-1]],
            cause="BlanketMaintenance"))

    for spec in scenario.get("dropout", ()):
        name = spec["channel"]
        if name not in channels:
            raise ValueError(f"dropout references unknown channel {name!r}")
        rows = rows_for(int(spec["cycle"]), int(spec["start_minute"]), int(spec["minutes"]))
        channels[name][rows] = np.nan
        intervals.append(MissingInterval(
            start=frame.timestamps[rows[0]], end=frame.timestamps[rows[-1]],
            cause="SingleSensorDropout", channel=name))

    if scenario.get("non_use"):
        idle = frame.sequence == IDLE
        if np.any(idle):
            for name in channels:
                channels[name][idle] = np.nan
            padded = np.concatenate(([False], idle, [False]))
            edges = np.diff(padded.astype(np.int8))
            starts = np.flatnonzero(edges == 1)
            ends = np.flatnonzero(edges == -1) - 1
            for s, e in zip(starts, ends):
                intervals.append(MissingInterval(
                    start=frame.timestamps[s], end=frame.timestamps[e], cause="NonUse"))

    out = TimeSeriesFrame(
        timestamps=frame.timestamps, channels=channels, units=dict(frame.units),
        logs=dict(frame.logs), step_minutes=frame.step_minutes)
    return out, replace(gt, missing=tuple(intervals))


def inject_outliers(frame: TimeSeriesFrame, gt: GroundTruth, scenario):
    """Plant labeled outlier points; each must land on an observed cell.

    Scenario entries: {cycle, channel, minute, kind, delta | value}.
    """
    if not scenario:
        return frame, gt
    channels = {k: v.copy() for k, v in frame.channels.items()}
    points = list(gt.outliers)
    cyc = frame.cycle
    minutes = frame.elapsed_minutes()
    for spec in scenario:
        name = spec["channel"]
        if name not in channels:
            raise ValueError(f"outlier references unknown channel {name!r}")
        kind = spec["kind"]
        base = np.flatnonzero(cyc == int(spec["cycle"]))
        if base.size == 0:
            raise ValueError(f"outlier references absent cycle {spec['cycle']}")
        target = minutes[base[0]] + int(spec["minute"])
        rows = base[minutes[base] == target]
        if rows.size == 0:
            raise ValueError("outlier point outside frame span")
        row = int(rows[0])
        original = channels[name][row]
        if np.isnan(original):
            raise ValueError("outlier point lands on a missing cell")
        value = float(spec["value"]) if "value" in spec else original + float(spec["delta"])
        channels[name][row] = value
        points.append(OutlierPoint(
            timestamp=frame.timestamps[row], channel=name, kind=kind,
            value=float(value), original=float(original)))
    out = TimeSeriesFrame(
        timestamps=frame.timestamps, channels=channels, units=dict(frame.units),
        logs=dict(frame.logs), step_minutes=frame.step_minutes)
    return out, replace(gt, outliers=tuple(points))
