"""Feature reduction, knowledge integration, and dataset assembly.

The curated dataset is built in a fixed order: clean, reduce channels,
integrate fault knowledge, transform, resample to the working interval,
then keep only the sequences where prediction matters. Both scenarios
share the machinery; the data-driven one simply skips every step that
needs the knowledge base.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .cleaning import (
    DISPOSITION_DELETE,
    DISPOSITION_RECONSTRUCT,
    GapInterval,
    GapReport,
    apply_verdicts,
    classify_gaps,
    detrended_iqr_flags,
    drop_intervals,
    ics_flags,
    impute_single_sensor,
    verify_outliers,
)
from .knowledge import BLOCKING, CYCLE_STOP, KnowledgeBase, _instances, evaluate_rules
from .timeseries import (
    IDLE,
    SEQUENCE_IDS,
    ResamplePolicy,
    TimeSeriesFrame,
    resample,
    slice_by_sequence,
)

log = logging.getLogger(__name__)

BALANCE_SEQUENCES = ("S09", "S10")
STAT_FEATURES = ("stat_mean", "stat_median", "stat_variance")
TARGET = "target"


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson correlations between columns; constant columns yield zeros."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-d matrix with at least two rows")
    if np.isnan(X).any():
        raise ValueError("X must not contain missing values")
    std = X.std(axis=0)
    constant = std == 0
    if constant.any():
        log.warning("constant columns in correlation input: %s",
                    np.flatnonzero(constant).tolist())
    out = np.zeros((X.shape[1], X.shape[1]))
    live = ~constant
    if live.sum() >= 1:
        sub = np.corrcoef(X[:, live], rowvar=False)
        sub = np.atleast_2d(sub)
        out[np.ix_(live, live)] = sub
    return out


@dataclass(frozen=True)
class PcaResult:
    mean: np.ndarray
    loadings: np.ndarray        # (channels, retained components)
    eigenvalues: np.ndarray     # all, descending
    explained: np.ndarray       # fraction per component, descending
    retained: int


def pca(X: np.ndarray, variance_threshold: float = 0.95) -> PcaResult:
    """Eigendecomposition of the covariance, keeping the smallest prefix
    of components that explains the requested variance fraction."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if not 0.0 < variance_threshold <= 1.0:
        raise ValueError("variance threshold must be in (0, 1]")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    # deterministic sign: largest-magnitude entry positive
    for j in range(eigvecs.shape[1]):
        i = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[i, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    total = eigvals.sum()
    if total == 0:
        raise ValueError("covariance has no variance to explain")
    explained = eigvals / total
    cumulative = np.cumsum(explained)
    retained = int(np.searchsorted(cumulative, variance_threshold - 1e-12) + 1)
    retained = min(retained, len(eigvals))
    return PcaResult(mean=mean, loadings=eigvecs[:, :retained],
                     eigenvalues=eigvals, explained=explained, retained=retained)


@dataclass(frozen=True)
class FeatureSelection:
    selected: tuple
    max_loading: dict
    retained_components: int
    explained: tuple
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"selected": list(self.selected),
                "max_loading": {k: float(v) for k, v in self.max_loading.items()},
                "retained_components": self.retained_components,
                "explained": [float(e) for e in self.explained],
                "notes": list(self.notes)}


def select_features(names, pca_result: PcaResult, corr: np.ndarray,
                    kb: KnowledgeBase = None, tau: float = 0.30) -> FeatureSelection:
    """Keep channels that load on the retained components.

    With a knowledge base, redundant sensor groups collapse to their
    strongest member and channels referenced by blocking rules are kept
    regardless of loading.
    """
    names = list(names)
    if pca_result.loadings.shape[0] != len(names):
        raise ValueError("loading rows do not match channel names")
    max_loading = {n: float(np.max(np.abs(pca_result.loadings[i])))
                   for i, n in enumerate(names)}
    keep = {n for n in names if max_loading[n] >= tau}
    notes = []
    for n in sorted(set(names) - keep):
        notes.append(f"dropped {n}: max loading {max_loading[n]:.3f} below {tau}")
    if kb is not None:
        for group in kb.redundancy:
            present = [n for n in group if n in keep]
            if len(present) > 1:
                best = max(present, key=lambda n: (max_loading[n], n))
                tied = [n for n in present if max_loading[n] == max_loading[best]]
                best = sorted(tied)[0]
                for n in present:
                    if n != best:
                        keep.discard(n)
                        notes.append(f"dropped {n}: redundant with {best}")
        for n in sorted(kb.blocking_channels()):
            if n in names and n not in keep:
                keep.add(n)
                notes.append(f"kept {n}: referenced by a blocking rule")
    selected = tuple(n for n in names if n in keep)
    if not selected:
        raise ValueError("feature selection removed every channel")
    return FeatureSelection(
        selected=selected, max_loading=max_loading,
        retained_components=pca_result.retained,
        explained=tuple(float(e) for e in pca_result.explained),
        notes=tuple(notes))


def standardize(frame: TimeSeriesFrame, fit_mask: np.ndarray):
    """Z-score every channel with moments from the fit rows only."""
    if fit_mask.dtype != bool or len(fit_mask) != len(frame):
        raise ValueError("fit mask must be a boolean row mask")
    if not fit_mask.any():
        raise ValueError("fit mask selects no rows")
    out = frame
    scaler = {}
    for name in frame.channels:
        values = frame.channels[name]
        mean = float(np.mean(values[fit_mask]))
        std = float(np.std(values[fit_mask]))
        if std == 0.0:
            log.warning("channel %s has zero variance on fit rows", name)
            std = 1.0
        scaler[name] = (mean, std)
        out = out.with_channel(name, (values - mean) / std, "z")
    return out, scaler


def add_statistical_features(frame: TimeSeriesFrame, over=None) -> TimeSeriesFrame:
    """Append per-row mean, median, and population variance channels."""
    names = list(over) if over is not None else list(frame.channels)
    missing = [n for n in names if n not in frame.channels]
    if missing:
        raise ValueError(f"unknown channels {missing}")
    stack = np.column_stack([frame.channels[n] for n in names])
    out = frame.with_channel("stat_mean", stack.mean(axis=1), "z")
    out = out.with_channel("stat_median", np.median(stack, axis=1), "z")
    out = out.with_channel("stat_variance", stack.var(axis=1), "z")
    return out


def prioritize(events, top_n: int = 10):
    """Rank causes by frequency among blocking events; mark the top ones.

    Competition ranking: ties share a rank and widen the cut rather than
    split it. Returns the re-annotated events and the ranking table.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    counts = Counter()
    for e in events:
        counts.setdefault(e.cause, 0)
        if e.severity == BLOCKING:
            counts[e.cause] += 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    table = []
    prioritized = set()
    for cause, count in ordered:
        rank = 1 + sum(1 for _, c in ordered if c > count)
        if rank <= top_n:
            prioritized.add(cause)
        table.append({"cause": cause, "count": count, "rank": rank,
                      "prioritized": rank <= top_n})
    annotated = tuple(
        replace(e, priority=e.cause in prioritized) for e in events)
    return annotated, tuple(table)


def _cause_columns(kb: KnowledgeBase):
    columns = []
    for entry in kb.fmeca:
        for cause in entry.causes:
            name = "cause_" + cause.replace(" ", "_")
            if name not in [c for c, _ in columns]:
                columns.append((name, cause))
    return columns


def annotate_faults(frame: TimeSeriesFrame, events, kb: KnowledgeBase) -> TimeSeriesFrame:
    """Stamp fault knowledge onto the rows each event covers.

    An event covers its sequence instance from onset to the instance
    end; those rows receive the severity and consequence bits, the
    cause one-hot, and the priority bit.
    """
    n = len(frame)
    cause_cols = _cause_columns(kb)
    cause_of = {c: name for name, c in cause_cols}
    arrays = {name: np.zeros(n, dtype=np.int64) for name, _ in cause_cols}
    severity = np.zeros(n, dtype=np.int64)
    consequence = np.zeros(n, dtype=np.int64)
    priority = np.zeros(n, dtype=np.int64)

    t = frame.timestamps
    instances = list(_instances(frame))
    for e in events:
        if e.cause not in cause_of:
            log.warning("event cause %r not in the knowledge base; one-hot left zero", e.cause)
        rows = None
        for s, stop in instances:
            if (frame.cycle[s] == e.cycle and frame.sequence[s] == e.sequence_id
                    and t[stop - 1] >= e.onset):
                rows = np.arange(s, stop)[t[s:stop] >= e.onset]
                break
        if rows is None or rows.size == 0:
            log.info("event %s in cycle %d covers no surviving rows", e.fault_name, e.cycle)
            continue
        if e.severity == BLOCKING:
            severity[rows] = 1
        if e.consequence == CYCLE_STOP:
            consequence[rows] = 1
        if e.priority:
            priority[rows] = 1
        if e.cause in cause_of:
            arrays[cause_of[e.cause]][rows] = 1

    logs = dict(frame.logs)
    logs["severity"] = severity
    logs["consequence"] = consequence
    logs["priority"] = priority
    for name, _ in cause_cols:
        logs[name] = arrays[name]
    return TimeSeriesFrame(
        timestamps=frame.timestamps, channels=dict(frame.channels),
        units=dict(frame.units), logs=logs, step_minutes=frame.step_minutes)


def reconstruct_target(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Target = blocking severity AND cycle-stop consequence AND priority."""
    for name in ("severity", "consequence", "priority"):
        if name not in frame.logs:
            raise ValueError(f"missing {name!r} log; integrate fault knowledge first")
    target = (frame.logs["severity"] & frame.logs["consequence"]
              & frame.logs["priority"]).astype(np.int64)
    logs = dict(frame.logs)
    logs[TARGET] = target
    return TimeSeriesFrame(
        timestamps=frame.timestamps, channels=dict(frame.channels),
        units=dict(frame.units), logs=logs, step_minutes=frame.step_minutes)


def encode_sequence(sequence: np.ndarray) -> np.ndarray:
    """Ordinal sequence position: idle is 0, S01..S13 are 1..13."""
    codes = {IDLE: 0}
    codes.update({sid: i + 1 for i, sid in enumerate(SEQUENCE_IDS)})
    try:
        return np.array([codes[s] for s in sequence], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"unknown sequence id {exc.args[0]!r}") from None


def select_balance_window(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Keep only the sequences whose failures the model must anticipate."""
    return slice_by_sequence(frame, BALANCE_SEQUENCES)


@dataclass(frozen=True)
class PreprocessParams:
    resample_minutes: int = 15
    variance_threshold: float = 0.95
    tau: float = 0.30
    top_n: int = 10
    iqr_k: float = 4.0
    iqr_window: int = 31
    ics_m: int = 2
    ics_alpha: float = 2e-5
    impute_k: int = 3
    verify_window_minutes: int = 60
    column_drop_missing_fraction: float = 0.5
    train_fraction: float = 0.6

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class CuratedDataset:
    """Model-ready matrix plus everything needed to audit or rebuild it."""

    scenario: str
    feature_names: tuple
    X: np.ndarray
    y: np.ndarray
    cycles: np.ndarray
    sequences: np.ndarray
    timestamps: np.ndarray
    interval_minutes: int
    scaler: dict
    selection: FeatureSelection
    gap_report: GapReport
    verdict_counts: dict = field(default_factory=dict)
    notes: tuple = ()

    def __len__(self):
        return self.X.shape[0]

    def to_files(self, csv_path, meta_path) -> None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "cycle", "sequence",
                             *self.feature_names, TARGET])
            for i in range(len(self)):
                writer.writerow([
                    str(np.datetime_as_string(self.timestamps[i], unit="s")),
                    int(self.cycles[i]), str(self.sequences[i]),
                    *[repr(float(v)) for v in self.X[i]],
                    int(self.y[i])])
        meta = {
            "scenario": self.scenario,
            "feature_names": list(self.feature_names),
            "interval_minutes": self.interval_minutes,
            "scaler": {k: [float(m), float(s)] for k, (m, s) in self.scaler.items()},
            "selection": self.selection.to_dict(),
            "gap_report": self.gap_report.to_dict(),
            "verdict_counts": dict(self.verdict_counts),
            "notes": list(self.notes),
        }
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_files(cls, csv_path, meta_path) -> "CuratedDataset":
        with open(meta_path) as fh:
            meta = json.load(fh)
        names = meta["feature_names"]
        timestamps, cycles, sequences, rows, targets = [], [], [], [], []
        with open(csv_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["timestamp", "cycle", "sequence", *names, TARGET]:
                raise ValueError("curated csv header does not match metadata")
            for rec in reader:
                timestamps.append(np.datetime64(rec[0], "s"))
                cycles.append(int(rec[1]))
                sequences.append(rec[2])
                rows.append([float(v) for v in rec[3:3 + len(names)]])
                targets.append(int(rec[-1]))
        selection = FeatureSelection(
            selected=tuple(meta["selection"]["selected"]),
            max_loading=meta["selection"]["max_loading"],
            retained_components=meta["selection"]["retained_components"],
            explained=tuple(meta["selection"]["explained"]),
            notes=tuple(meta["selection"]["notes"]))
        gaps = tuple(
            GapInterval(start=np.datetime64(g["start"], "s"),
                        end=np.datetime64(g["end"], "s"), cause=g["cause"],
                        disposition=g["disposition"], channel=g.get("channel"))
            for g in meta["gap_report"]["intervals"])
        return cls(
            scenario=meta["scenario"], feature_names=tuple(names),
            X=np.array(rows, dtype=float),
            y=np.array(targets, dtype=np.int8),
            cycles=np.array(cycles, dtype=np.int64),
            sequences=np.array(sequences, dtype="U4"),
            timestamps=np.array(timestamps, dtype="datetime64[s]"),
            interval_minutes=int(meta["interval_minutes"]),
            scaler={k: (v[0], v[1]) for k, v in meta["scaler"].items()},
            selection=selection, gap_report=GapReport(intervals=gaps),
            verdict_counts=dict(meta["verdict_counts"]),
            notes=tuple(meta["notes"]))


def build_dataset(frame: TimeSeriesFrame, kb: KnowledgeBase, scenario: str,
                  params: PreprocessParams = None) -> CuratedDataset:
    """Run the full curation pipeline on raw telemetry.

    Order: clean (gaps, then outliers), reduce channels, integrate fault
    knowledge, transform, resample, balance. The data-driven scenario
    uses the automation fault log as its target and never consults the
    knowledge base.
    """
    params = params or PreprocessParams()
    if scenario not in ("s1", "s2"):
        raise ValueError(f"unknown scenario {scenario!r}")
    notes = []

    # within-cycle position, in minutes since the cycle's first raw row;
    # survives row deletion and resamples to the bucket's end minute
    t_sec = frame.timestamps.astype(np.int64)
    _, first_idx, inverse = np.unique(frame.cycle, return_index=True,
                                      return_inverse=True)
    logs = dict(frame.logs)
    logs["cycle_minute"] = (t_sec - t_sec[first_idx][inverse]) // 60
    frame = TimeSeriesFrame(
        timestamps=frame.timestamps, channels=dict(frame.channels),
        units=dict(frame.units), logs=logs, step_minutes=frame.step_minutes)

    # cleaning: oversparse columns, then gaps, then outliers
    fractions = {name: float(np.isnan(values).mean())
                 for name, values in frame.channels.items()}
    for name, frac in fractions.items():
        if frac > params.column_drop_missing_fraction:
            frame = frame.drop_channels([name])
            notes.append(f"dropped column {name}: {frac:.0%} missing")
    if not frame.channels:
        raise ValueError("every channel exceeded the missing-fraction limit")

    report = classify_gaps(frame, scenario)
    for gap in report.intervals:
        if gap.disposition == DISPOSITION_RECONSTRUCT:
            frame = impute_single_sensor(frame, gap, params.impute_k)
    frame = drop_intervals(frame, report)
    if len(frame) == 0:
        raise ValueError("gap handling removed every row")
    for name, values in frame.channels.items():
        if np.isnan(values).any():
            raise ValueError(f"missing cells remain in {name} after cleaning")

    events = evaluate_rules(frame, kb) if scenario == "s2" else []

    flags = detrended_iqr_flags(frame, params.iqr_k, params.iqr_window)
    flags.extend(ics_flags(frame, params.ics_m, params.ics_alpha))
    flags.sort(key=lambda f: (f[0], f[1] or ""))
    verdict_counts = {}
    if scenario == "s2":
        verdicts = verify_outliers(frame, flags, kb, events,
                                   params.verify_window_minutes)
        verdict_counts = dict(Counter(v.verdict for v in verdicts))
        frame = apply_verdicts(frame, verdicts)
    else:
        drop = sorted({row for row, _ in flags})
        verdict_counts = {"deleted_rows": len(drop)}
        if drop:
            keep = np.ones(len(frame), dtype=bool)
            keep[drop] = False
            frame = frame.take(np.flatnonzero(keep))
    if len(frame) == 0:
        raise ValueError("outlier handling removed every row")

    # reduction on internally standardized channels
    names = list(frame.channels)
    X_all = np.column_stack([frame.channels[n] for n in names])
    std = X_all.std(axis=0)
    std[std == 0] = 1.0
    X_std = (X_all - X_all.mean(axis=0)) / std
    corr = correlation_matrix(X_std)
    pcares = pca(X_std, params.variance_threshold)
    selection = select_features(names, pcares, corr,
                                kb if scenario == "s2" else None, params.tau)
    frame = frame.drop_channels([n for n in names if n not in selection.selected])

    # knowledge integration
    if scenario == "s2":
        events, priority_table = prioritize(events, params.top_n)
        frame = annotate_faults(frame, events, kb)
        notes.extend(f"cause {row['cause']}: {row['count']} blocking events, rank {row['rank']}"
                     for row in priority_table)

    # transform: scaler fitted on the leading train cycles only
    unique_cycles = np.unique(frame.cycle)
    n_train = max(1, math.floor(params.train_fraction * len(unique_cycles)))
    train_cycles = set(unique_cycles[:n_train].tolist())
    fit_mask = np.isin(frame.cycle, list(train_cycles))
    frame, scaler = standardize(frame, fit_mask)
    frame = add_statistical_features(frame, selection.selected)

    # target
    if scenario == "s2":
        frame = reconstruct_target(frame)
    else:
        logs = dict(frame.logs)
        logs[TARGET] = (frame.logs["fault_log"] > 0).astype(np.int64)
        frame = TimeSeriesFrame(
            timestamps=frame.timestamps, channels=dict(frame.channels),
            units=dict(frame.units), logs=logs, step_minutes=frame.step_minutes)

    policy = ResamplePolicy(interval_minutes=params.resample_minutes,
                            numeric="mean", flags="any", categorical="last")
    frame = resample(frame, policy)
    frame = select_balance_window(frame)
    if len(frame) == 0:
        raise ValueError("balance window removed every row")

    # the cycle number stays split metadata, not a feature: a chronological
    # split makes it a row id the trees would memorize
    channel_names = list(frame.channels)   # selected + statistical
    feature_names = [*channel_names, "sequence", "cycle_minute"]
    columns = [frame.channels[n] for n in channel_names]
    columns.append(encode_sequence(frame.sequence).astype(float))
    columns.append(frame.logs["cycle_minute"].astype(float))
    if scenario == "s2":
        kb_cols = ["severity", "consequence",
                   *[name for name, _ in _cause_columns(kb)], "priority"]
        feature_names.extend(kb_cols)
        columns.extend(frame.logs[c].astype(float) for c in kb_cols)

    X = np.column_stack(columns)
    y = frame.logs[TARGET].astype(np.int8)
    notes.append(f"{len(frame)} rows, {X.shape[1]} features, "
                 f"{int(y.sum())} positive")
    return CuratedDataset(
        scenario=scenario, feature_names=tuple(feature_names), X=X, y=y,
        cycles=frame.cycle.copy(), sequences=frame.sequence.copy(),
        timestamps=frame.timestamps.copy(),
        interval_minutes=params.resample_minutes, scaler=scaler,
        selection=selection, gap_report=report,
        verdict_counts=verdict_counts, notes=tuple(notes))
