"""Declarative equipment knowledge and the rule engine that applies it.

The knowledge base bundles four things: the mode/sequence model of the
cyclic equipment, IF-THEN monitoring rules with thresholds and temporal
qualifiers, an FMECA catalog (fault names, causes, severity, consequence,
corrective action), and nominal operating envelopes per channel and
sequence. It is loaded from a YAML document and is immutable afterwards,
so one instance can be shared freely.

``evaluate_rules`` walks a telemetry frame sequence instance by sequence
instance and emits one fault event per (rule, cycle) that fires, which is
how the equipment automation latches: once a rule trips, the cycle is
interrupted until someone intervenes, so repeat firings within the same
cycle carry no information.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .timeseries import IDLE, SEQUENCE_COL, SEQUENCE_IDS, TimeSeriesFrame

log = logging.getLogger(__name__)

BLOCKING = "Blocking"
NON_BLOCKING = "NonBlocking"
CYCLE_STOP = "CycleStop"
ACKNOWLEDGE = "Acknowledge"

SOURCE_AUTOMATION = "AutomationLog"
SOURCE_RULE_ENGINE = "RuleEngine"
SOURCE_GROUND_TRUTH = "GroundTruth"
SOURCES = (SOURCE_AUTOMATION, SOURCE_RULE_ENGINE, SOURCE_GROUND_TRUTH)

IN_ENVELOPE = "InEnvelope"
OUT_OF_ENVELOPE = "OutOfEnvelope"
NO_ENVELOPE = "NoEnvelope"

# Severity and consequence travel in lockstep: a blocking fault stops the
# cycle, a non-blocking one only demands acknowledgment.
_CONSEQUENCE_OF = {BLOCKING: CYCLE_STOP, NON_BLOCKING: ACKNOWLEDGE}

# Fixed mode layout of the equipment; only durations vary by installation.
CANONICAL_MODES = (
    ("Preparation", SEQUENCE_IDS[0:8]),
    ("Heating", SEQUENCE_IDS[8:9]),
    ("Sampling", SEQUENCE_IDS[9:10]),
    ("Cooling", SEQUENCE_IDS[10:11]),
    ("Disconnection", SEQUENCE_IDS[11:13]),
)


def _check_pairing(severity: str, consequence: str, where: str) -> None:
    if severity not in _CONSEQUENCE_OF:
        raise ValueError(f"{where}: unknown severity {severity!r}")
    if consequence != _CONSEQUENCE_OF[severity]:
        raise ValueError(
            f"{where}: severity {severity} requires consequence "
            f"{_CONSEQUENCE_OF[severity]}, got {consequence!r}"
        )


@dataclass(frozen=True)
class ModeModel:
    """Operating modes in cycle order and the nominal minutes per sequence."""

    modes: tuple
    sequences: dict      # mode name -> tuple of sequence ids
    durations: dict      # sequence id -> minutes

    def __post_init__(self):
        canon = tuple((m, tuple(s)) for m, s in CANONICAL_MODES)
        got = tuple((m, tuple(self.sequences.get(m, ()))) for m in self.modes)
        if got != canon:
            raise ValueError("mode model must assign S01..S13 to the five canonical modes")
        missing = set(SEQUENCE_IDS) - set(self.durations)
        if missing:
            raise ValueError(f"durations missing for {sorted(missing)}")
        for seq in SEQUENCE_IDS:
            if self.durations[seq] <= 0:
                raise ValueError(f"duration of {seq} must be positive")

    def mode_of(self, sequence_id: str) -> str:
        for mode in self.modes:
            if sequence_id in self.sequences[mode]:
                return mode
        raise KeyError(sequence_id)

    def cycle_minutes(self) -> int:
        """Active minutes of one cycle, idle gaps excluded."""
        return sum(self.durations[s] for s in SEQUENCE_IDS)


@dataclass(frozen=True)
class SensorPredicate:
    """Threshold condition on one numeric channel.

    ``comparator`` is one of <, <=, >, >= against a scalar threshold, or
    ``outside`` against a (low, high) range. Missing readings never satisfy
    a predicate.
    """

    channel: str
    comparator: str
    threshold: object
    unit: str

    def __post_init__(self):
        if self.comparator in ("<", "<=", ">", ">="):
            if not isinstance(self.threshold, (int, float)):
                raise ValueError(f"comparator {self.comparator!r} needs a scalar threshold")
        elif self.comparator == "outside":
            thr = self.threshold
            if not (isinstance(thr, tuple) and len(thr) == 2 and thr[0] < thr[1]):
                raise ValueError("'outside' needs a (low, high) range with low < high")
        else:
            raise ValueError(f"unknown comparator {self.comparator!r}")

    def holds(self, values: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            if self.comparator == "<":
                return values < self.threshold
            if self.comparator == "<=":
                return values <= self.threshold
            if self.comparator == ">":
                return values > self.threshold
            if self.comparator == ">=":
                return values >= self.threshold
            lo, hi = self.threshold
            return (values < lo) | (values > hi)


@dataclass(frozen=True)
class LogPredicate:
    """Equality condition over one or more discrete logs, OR-combined."""

    logs: tuple
    value: int

    def __post_init__(self):
        if not self.logs:
            raise ValueError("log predicate needs at least one log name")


@dataclass(frozen=True)
class MonitoringRule:
    """One IF-THEN monitoring rule bound to a sequence.

    The sensor and log predicates, when both present, must hold together.
    Temporal qualifiers, all in elapsed minutes from sequence start:

    - ``step_minute``: condition only applies from this offset on,
    - ``within_first_minutes``: condition only applies before this offset,
    - ``no_memory_first_minutes``: inverted detection — the rule fires AT
      minute N when the condition never held during [0, N); used for
      "pressure never reached vacuum in time" style checks.
    """

    id: int
    mode: str
    sequence_id: str
    fault_name: str
    severity: str
    consequence: str
    cause: str = None
    sensor: SensorPredicate = None
    log: LogPredicate = None
    step_minute: int = 0
    within_first_minutes: int = None
    no_memory_first_minutes: int = None

    def __post_init__(self):
        if self.sequence_id not in SEQUENCE_IDS:
            raise ValueError(f"rule {self.id}: unknown sequence id {self.sequence_id!r}")
        if self.sensor is None and self.log is None:
            raise ValueError(f"rule {self.id}: needs a sensor or log predicate")
        if self.no_memory_first_minutes is not None:
            if self.step_minute or self.within_first_minutes is not None:
                raise ValueError(
                    f"rule {self.id}: no-memory qualifier excludes other temporal qualifiers"
                )
            if self.no_memory_first_minutes <= 0:
                raise ValueError(f"rule {self.id}: no-memory window must be positive")
        _check_pairing(self.severity, self.consequence, f"rule {self.id}")


@dataclass(frozen=True)
class FmecaEntry:
    """Failure mode record: what can cause it and how bad it is."""

    fault_name: str
    causes: tuple
    severity: str
    consequence: str
    corrective_action: str = ""

    def __post_init__(self):
        if not self.causes:
            raise ValueError(f"FMECA entry {self.fault_name!r} needs at least one cause")
        _check_pairing(self.severity, self.consequence, f"FMECA entry {self.fault_name!r}")


@dataclass(frozen=True)
class OperatingEnvelope:
    """Nominal [min, max] band for one channel inside one sequence."""

    channel: str
    mode: str
    sequence_id: str
    min: float
    max: float

    def __post_init__(self):
        if self.sequence_id not in SEQUENCE_IDS:
            raise ValueError(f"envelope {self.channel}: unknown sequence {self.sequence_id!r}")
        if not self.min < self.max:
            raise ValueError(f"envelope {self.channel}/{self.sequence_id}: min must be < max")


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable bundle of mode model, rules, FMECA, envelopes, redundancy."""

    mode_model: ModeModel
    rules: tuple
    fmeca: tuple
    envelopes: tuple
    redundancy: tuple    # tuple of frozensets of mutually redundant channels

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"duplicate rule ids: {sorted(dupes)}")
        names = [e.fault_name for e in self.fmeca]
        if len(names) != len(set(names)):
            raise ValueError("FMECA fault names must be unique")
        entries = {e.fault_name: e for e in self.fmeca}
        units = {}
        for rule in self.rules:
            entry = entries.get(rule.fault_name)
            if entry is None:
                raise ValueError(f"rule {rule.id}: no FMECA entry for {rule.fault_name!r}")
            if (rule.severity, rule.consequence) != (entry.severity, entry.consequence):
                raise ValueError(f"rule {rule.id}: severity/consequence disagree with FMECA")
            if rule.cause is not None and rule.cause not in entry.causes:
                raise ValueError(f"rule {rule.id}: cause {rule.cause!r} not in FMECA causes")
            if self.mode_model.mode_of(rule.sequence_id) != rule.mode:
                raise ValueError(f"rule {rule.id}: mode does not own sequence {rule.sequence_id}")
            if rule.sensor is not None:
                seen = units.setdefault(rule.sensor.channel, rule.sensor.unit)
                if seen != rule.sensor.unit:
                    raise ValueError(
                        f"rule {rule.id}: unit {rule.sensor.unit!r} for channel "
                        f"{rule.sensor.channel!r} conflicts with {seen!r}"
                    )
        for env in self.envelopes:
            if self.mode_model.mode_of(env.sequence_id) != env.mode:
                raise ValueError(f"envelope {env.channel}: mode does not own {env.sequence_id}")
        flat = [c for group in self.redundancy for c in group]
        if len(flat) != len(set(flat)):
            raise ValueError("redundancy groups must be disjoint")

    def entry(self, fault_name: str) -> FmecaEntry:
        for e in self.fmeca:
            if e.fault_name == fault_name:
                return e
        raise KeyError(f"unknown fault name {fault_name!r}")

    def blocking_channels(self) -> set:
        """Channels referenced by blocking rules' sensor predicates."""
        return {
            r.sensor.channel
            for r in self.rules
            if r.severity == BLOCKING and r.sensor is not None
        }


@dataclass(frozen=True)
class FaultEvent:
    """One fault occurrence, whoever reported it."""

    onset: np.datetime64
    cycle: int
    sequence_id: str
    fault_name: str
    cause: str
    severity: str
    consequence: str
    priority: bool = False
    source: str = SOURCE_RULE_ENGINE

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown event source {self.source!r}")
        _check_pairing(self.severity, self.consequence, f"event {self.fault_name!r}")

    def to_dict(self) -> dict:
        return {
            "onset": str(np.datetime_as_string(np.datetime64(self.onset, "s"), unit="s")),
            "cycle": int(self.cycle),
            "sequence_id": self.sequence_id,
            "fault_name": self.fault_name,
            "cause": self.cause,
            "severity": self.severity,
            "consequence": self.consequence,
            "priority": bool(self.priority),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultEvent":
        return cls(
            onset=np.datetime64(d["onset"], "s"),
            cycle=int(d["cycle"]),
            sequence_id=d["sequence_id"],
            fault_name=d["fault_name"],
            cause=d["cause"],
            severity=d["severity"],
            consequence=d["consequence"],
            priority=bool(d.get("priority", False)),
            source=d["source"],
        )


def _build_kb(doc: dict) -> KnowledgeBase:
    required = ("mode_model", "rules", "fmeca", "envelopes", "redundancy")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"knowledge base document missing sections: {missing}")

    mm = doc["mode_model"]
    mode_model = ModeModel(
        modes=tuple(m["name"] for m in mm["modes"]),
        sequences={m["name"]: tuple(m["sequences"]) for m in mm["modes"]},
        durations={str(k): int(v) for k, v in mm["durations"].items()},
    )

    rules = []
    for r in doc["rules"]:
        sensor = None
        if "sensor" in r:
            s = r["sensor"]
            thr = s["threshold"]
            if isinstance(thr, (list, tuple)):
                thr = (float(thr[0]), float(thr[1]))
            else:
                thr = float(thr)
            sensor = SensorPredicate(
                channel=s["channel"], comparator=s["comparator"], threshold=thr, unit=s["unit"]
            )
        logp = None
        if "log" in r:
            logp = LogPredicate(logs=tuple(r["log"]["logs"]), value=int(r["log"]["value"]))
        rules.append(MonitoringRule(
            id=int(r["id"]),
            mode=r["mode"],
            sequence_id=r["sequence_id"],
            fault_name=r["fault_name"],
            severity=r["severity"],
            consequence=r["consequence"],
            cause=r.get("cause"),
            sensor=sensor,
            log=logp,
            step_minute=int(r.get("step_minute", 0)),
            within_first_minutes=r.get("within_first_minutes"),
            no_memory_first_minutes=r.get("no_memory_first_minutes"),
        ))

    fmeca = tuple(
        FmecaEntry(
            fault_name=e["fault_name"],
            causes=tuple(e["causes"]),
            severity=e["severity"],
            consequence=e["consequence"],
            corrective_action=e.get("corrective_action", ""),
        )
        for e in doc["fmeca"]
    )
    envelopes = tuple(
        OperatingEnvelope(
            channel=e["channel"],
            mode=e["mode"],
            sequence_id=e["sequence_id"],
            min=float(e["min"]),
            max=float(e["max"]),
        )
        for e in doc["envelopes"]
    )
    redundancy = tuple(frozenset(group) for group in doc["redundancy"])
    kb = KnowledgeBase(
        mode_model=mode_model,
        rules=tuple(rules),
        fmeca=fmeca,
        envelopes=envelopes,
        redundancy=redundancy,
    )
    log.info("knowledge base loaded: %d rules, %d FMECA entries, %d envelopes",
             len(kb.rules), len(kb.fmeca), len(kb.envelopes))
    return kb


def load_kb(path) -> KnowledgeBase:
    """Load and fully validate a knowledge base from a YAML document."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: knowledge base document must be a mapping")
    return _build_kb(doc)


def default_kb() -> KnowledgeBase:
    """The knowledge base shipped with the package."""
    text = resources.files("pdmpipe").joinpath("data/knowledge_base.yaml").read_text("utf-8")
    return _build_kb(yaml.safe_load(text))


def _instances(frame: TimeSeriesFrame):
    """Contiguous (start, end) runs of constant (sequence, cycle)."""
    n = len(frame)
    if n == 0:
        return
    seq = frame.sequence
    cyc = frame.cycle
    change = np.flatnonzero((seq[1:] != seq[:-1]) | (cyc[1:] != cyc[:-1])) + 1
    bounds = np.concatenate(([0], change, [n]))
    for s, e in zip(bounds[:-1], bounds[1:]):
        yield int(s), int(e)


def _onset_offset(frame: TimeSeriesFrame, rule: MonitoringRule, start: int, end: int,
                  elapsed: np.ndarray):
    """Local row offset at which the rule fires within one instance, or None."""
    cond = np.ones(end - start, dtype=bool)
    if rule.sensor is not None:
        cond &= rule.sensor.holds(frame.channels[rule.sensor.channel][start:end])
    if rule.log is not None:
        hit = np.zeros(end - start, dtype=bool)
        for name in rule.log.logs:
            hit |= frame.logs[name][start:end] == rule.log.value
        cond &= hit

    if rule.no_memory_first_minutes is not None:
        n_min = rule.no_memory_first_minutes
        if np.any(cond[elapsed < n_min]):
            return None
        later = np.flatnonzero(elapsed >= n_min)
        return int(later[0]) if later.size else None

    mask = elapsed >= rule.step_minute
    if rule.within_first_minutes is not None:
        mask &= elapsed < rule.within_first_minutes
    hits = np.flatnonzero(cond & mask)
    return int(hits[0]) if hits.size else None


def evaluate_rules(frame: TimeSeriesFrame, kb: KnowledgeBase) -> list:
    """Apply every monitoring rule to the frame and collect fault events.

    Evaluation is per sequence instance, with elapsed time measured from
    the instance's first row. A rule fires at most once per cycle (the
    automation latches); the event onset is the first timestamp at which
    the rule condition is met. Events come back sorted by onset.
    """
    for rule in kb.rules:
        if rule.sensor is not None:
            if rule.sensor.channel not in frame.channels:
                raise ValueError(f"rule {rule.id}: frame lacks channel {rule.sensor.channel!r}")
            if frame.units[rule.sensor.channel] != rule.sensor.unit:
                raise ValueError(
                    f"rule {rule.id}: channel {rule.sensor.channel!r} is in "
                    f"{frame.units[rule.sensor.channel]!r}, rule expects {rule.sensor.unit!r}"
                )
        if rule.log is not None:
            absent = [l for l in rule.log.logs if l not in frame.logs]
            if absent:
                raise ValueError(f"rule {rule.id}: frame lacks logs {absent}")

    by_sequence = {}
    for rule in kb.rules:
        by_sequence.setdefault(rule.sequence_id, []).append(rule)

    events = []
    fired = set()
    for start, end in _instances(frame):
        seq = str(frame.sequence[start])
        rules = by_sequence.get(seq)
        if not rules:
            continue
        cycle = int(frame.cycle[start])
        delta = (frame.timestamps[start:end] - frame.timestamps[start])
        elapsed = delta.astype("timedelta64[s]").astype(np.int64) // 60
        for rule in rules:
            if (rule.id, cycle) in fired:
                continue
            offset = _onset_offset(frame, rule, start, end, elapsed)
            if offset is None:
                continue
            fired.add((rule.id, cycle))
            entry = kb.entry(rule.fault_name)
            events.append(FaultEvent(
                onset=frame.timestamps[start + offset],
                cycle=cycle,
                sequence_id=seq,
                fault_name=rule.fault_name,
                cause=rule.cause if rule.cause is not None else entry.causes[0],
                severity=entry.severity,
                consequence=entry.consequence,
                source=SOURCE_RULE_ENGINE,
            ))
    events.sort(key=lambda e: (e.onset.astype("datetime64[s]").astype(np.int64),
                               e.cycle, e.fault_name))
    return events


def classify_fault(name: str, kb: KnowledgeBase):
    """FMECA triple (causes, severity, consequence) for a fault name."""
    entry = kb.entry(name)
    return entry.causes, entry.severity, entry.consequence


def envelope_check(row: dict, kb: KnowledgeBase) -> dict:
    """Judge each channel reading in a row against its operating envelope.

    The row must carry sequence context. Channels with no envelope for that
    sequence, and missing readings (which assert nothing), get NoEnvelope.
    """
    sequence = row.get(SEQUENCE_COL)
    if sequence is None:
        raise ValueError("row lacks sequence context")
    bands = {(e.channel, e.sequence_id): e for e in kb.envelopes}
    verdicts = {}
    for name, value in row.items():
        if not isinstance(value, float):
            continue
        env = bands.get((name, sequence))
        if env is None or np.isnan(value):
            verdicts[name] = NO_ENVELOPE
        elif env.min <= value <= env.max:
            verdicts[name] = IN_ENVELOPE
        else:
            verdicts[name] = OUT_OF_ENVELOPE
    return verdicts
