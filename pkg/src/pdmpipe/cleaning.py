"""Gap classification, imputation, and outlier screening for raw telemetry.

Cleaning is scenario-aware only in its dispositions: the data-driven
scenario deletes everything suspicious, while the knowledge-informed
scenario reconstructs single-sensor gaps from past cycles and keeps
flagged points that line up with a detected fault.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.stats import chi2

from .knowledge import BLOCKING, OUT_OF_ENVELOPE, KnowledgeBase, _instances, envelope_check
from .timeseries import IDLE, TimeSeriesFrame

log = logging.getLogger(__name__)

CAUSE_BLANKET = "BlanketMaintenance"
CAUSE_DROPOUT = "SingleSensorDropout"
CAUSE_NON_USE = "NonUse"
CAUSE_UNKNOWN = "Unknown"

DISPOSITION_DELETE = "Delete"
DISPOSITION_RECONSTRUCT = "Reconstruct"

VERDICT_CORRECTED = "CorrectedFalsePositive"
VERDICT_TAGGED = "TaggedTrueRelevant"
VERDICT_DROPPED = "DroppedTrueIrrelevant"


@dataclass(frozen=True)
class GapInterval:
    """One maximal run of rows sharing a missingness pattern."""

    start: np.datetime64
    end: np.datetime64          # inclusive
    cause: str
    disposition: str
    channel: str = None         # set only for single-sensor gaps

    def to_dict(self) -> dict:
        return {"start": str(np.datetime_as_string(self.start, unit="s")),
                "end": str(np.datetime_as_string(self.end, unit="s")),
                "cause": self.cause, "disposition": self.disposition,
                "channel": self.channel}


@dataclass(frozen=True)
class GapReport:
    intervals: tuple

    def to_dict(self) -> dict:
        return {"intervals": [g.to_dict() for g in self.intervals]}


@dataclass(frozen=True)
class OutlierVerdict:
    """Fate of one flagged point (or whole row when channel is None)."""

    index: int
    channel: str
    verdict: str
    replacement: float = None

    def to_dict(self) -> dict:
        return {"index": self.index, "channel": self.channel,
                "verdict": self.verdict, "replacement": self.replacement}


def _runs(mask: np.ndarray):
    """Yield (start, end) index pairs of maximal True runs, end exclusive."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list(zip(starts, ends))


def classify_gaps(frame: TimeSeriesFrame, scenario: str) -> GapReport:
    """Partition missing cells into causal intervals with dispositions.

    Rows with every channel missing are non-use when idle, blanket
    maintenance otherwise. Rows missing exactly one channel form
    single-sensor gaps; any other pattern is unknown. The data-driven
    scenario deletes all of them; the knowledge-informed scenario
    reconstructs single-sensor gaps and deletes the rest.
    """
    if scenario not in ("s1", "s2"):
        raise ValueError(f"unknown scenario {scenario!r}")
    names = list(frame.channels)
    missing = np.column_stack([np.isnan(frame.channels[c]) for c in names])
    n_missing = missing.sum(axis=1)
    d = len(names)
    idle = frame.sequence == IDLE
    reconstruct = DISPOSITION_RECONSTRUCT if scenario == "s2" else DISPOSITION_DELETE

    intervals = []
    all_gone = n_missing == d
    # split all-missing runs at idle boundaries so causes stay uniform
    for flavor, cause in ((all_gone & idle, CAUSE_NON_USE),
                          (all_gone & ~idle, CAUSE_BLANKET)):
        for s, e in _runs(flavor):
            intervals.append(GapInterval(
                start=frame.timestamps[s], end=frame.timestamps[e - 1],
                cause=cause, disposition=DISPOSITION_DELETE))

    single = n_missing == 1
    for j, name in enumerate(names):
        for s, e in _runs(single & missing[:, j]):
            intervals.append(GapInterval(
                start=frame.timestamps[s], end=frame.timestamps[e - 1],
                cause=CAUSE_DROPOUT, disposition=reconstruct, channel=name))

    for s, e in _runs((n_missing > 1) & (n_missing < d)):
        intervals.append(GapInterval(
            start=frame.timestamps[s], end=frame.timestamps[e - 1],
            cause=CAUSE_UNKNOWN, disposition=DISPOSITION_DELETE))

    intervals.sort(key=lambda g: (g.start.astype("int64"), g.channel or ""))
    return GapReport(intervals=tuple(intervals))


def impute_single_sensor(frame: TimeSeriesFrame, gap: GapInterval, k: int = 3) -> TimeSeriesFrame:
    """Fill one single-sensor gap from the same position in past cycles.

    Each missing cell takes the mean of the channel's value at the same
    sequence offset in up to k prior cycles where it was observed; with
    no usable history it falls back to the channel median. A channel
    with no observed cells at all cannot be reconstructed.
    """
    if gap.channel is None:
        raise ValueError("gap is not a single-sensor interval")
    if k < 1:
        raise ValueError("k must be >= 1")
    values = frame.channels[gap.channel].copy()
    observed = ~np.isnan(values)
    if not observed.any():
        raise ValueError(f"channel {gap.channel!r} has no observed cells")
    fallback = float(np.median(values[observed]))

    offsets = np.empty(len(frame), dtype=np.int64)
    for s, e in _instances(frame):
        offsets[s:e] = np.arange(e - s)
    position = {}
    cyc = frame.cycle
    seq = frame.sequence
    for i in range(len(frame)):
        position[(int(cyc[i]), seq[i], int(offsets[i]))] = i

    t = frame.timestamps
    rows = np.flatnonzero((t >= gap.start) & (t <= gap.end) & ~observed)
    for r in rows:
        donors = []
        c = int(cyc[r]) - 1
        while c >= 1 and len(donors) < k:
            j = position.get((c, seq[r], int(offsets[r])))
            if j is not None and observed[j]:
                donors.append(values[j])
            c -= 1
        values[r] = float(np.mean(donors)) if donors else fallback
    return frame.with_channel(gap.channel, values, frame.units[gap.channel])


def drop_intervals(frame: TimeSeriesFrame, report: GapReport) -> TimeSeriesFrame:
    """Remove every row covered by a Delete interval."""
    keep = np.ones(len(frame), dtype=bool)
    t = frame.timestamps
    for gap in report.intervals:
        if gap.disposition == DISPOSITION_DELETE:
            keep &= ~((t >= gap.start) & (t <= gap.end))
    return frame.take(np.flatnonzero(keep))


def detect_outliers_iqr(values: np.ndarray, k: float = 1.5) -> np.ndarray:
    """Indices of points outside the quartile fences [Q1-k*IQR, Q3+k*IQR].

    Quartiles use linear interpolation between order statistics; missing
    values are ignored and never flagged.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    x = np.asarray(values, dtype=float)
    observed = ~np.isnan(x)
    if observed.sum() == 0:
        return np.empty(0, dtype=np.int64)
    q1, q3 = np.quantile(x[observed], [0.25, 0.75], method="linear")
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    with np.errstate(invalid="ignore"):
        mask = (x < lo) | (x > hi)
    return np.flatnonzero(mask)


def detect_outliers_ics(X: np.ndarray, m: int = 2, alpha: float = 0.025) -> np.ndarray:
    """Row indices unusual under an invariant-coordinate projection.

    Pairs the covariance with the fourth-moment scatter, solves the
    generalized eigenproblem, keeps the m most kurtotic components, and
    flags rows whose squared score exceeds the chi-square(m) quantile
    at level alpha.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, d = X.shape
    if n < 10 * d:
        raise ValueError(f"need at least {10 * d} rows for {d} channels, got {n}")
    if not 1 <= m <= d:
        raise ValueError("m must be between 1 and the number of channels")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if np.isnan(X).any():
        raise ValueError("X must not contain missing values")

    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance scatter is singular") from None
    # squared Mahalanobis distances via the Cholesky factor
    w = np.linalg.solve(chol, centered.T)
    d2 = np.sum(w * w, axis=0)
    cov4 = (centered * d2[:, None]).T @ centered / (n * (d + 2))
    try:
        eigvals, eigvecs = eigh(cov4, cov)
    except np.linalg.LinAlgError:
        raise ValueError("scatter pair is not jointly diagonalizable") from None
    order = np.argsort(eigvals)[::-1]       # most kurtotic directions first
    V = eigvecs[:, order[:m]]
    scores = centered @ V
    dist = np.sum(scores * scores, axis=1)
    cutoff = chi2.ppf(1.0 - alpha, df=m)
    return np.flatnonzero(dist > cutoff)


def _running_median(x: np.ndarray, window: int) -> np.ndarray:
    """Centered running median with shrinking windows at the edges."""
    n = len(x)
    half = window // 2
    out = np.empty(n)
    if n > window:
        views = np.lib.stride_tricks.sliding_window_view(x, window)
        out[half:n - half] = np.median(views, axis=1)
        edge = half
    else:
        edge = n
    for i in range(min(edge, n)):
        out[i] = np.median(x[max(0, i - half):i + half + 1])
    for i in range(max(n - edge, 0), n):
        out[i] = np.median(x[max(0, i - half):i + half + 1])
    return out


def detrended_iqr_flags(frame: TimeSeriesFrame, k: float, window: int = 31):
    """Per-channel spike candidates as (row, channel) pairs.

    Each channel is screened per sequence instance against its running
    median, so ramps and decays stay inside the fences while isolated
    spikes stand out. Rows within half a window of an instance boundary
    are exempt: the shrinking median is biased there and a trend looks
    like a spike.
    """
    flags = []
    half = window // 2
    for s, e in _instances(frame):
        if e - s <= window:
            continue
        for name in frame.channels:
            x = frame.channels[name][s:e]
            observed = ~np.isnan(x)
            if observed.sum() < 4:
                continue
            resid = x - _running_median(x, window)
            for i in detect_outliers_iqr(resid, k):
                if half <= i < (e - s) - half:
                    flags.append((s + int(i), name))
    flags.sort(key=lambda f: (f[0], f[1]))
    return flags


def ics_flags(frame: TimeSeriesFrame, m: int, alpha: float):
    """Whole-row candidates per sequence id, pooled across cycles."""
    names = list(frame.channels)
    X = np.column_stack([frame.channels[c] for c in names])
    seq = frame.sequence
    flags = []
    for sid in np.unique(seq):
        rows = np.flatnonzero(seq == sid)
        sub = X[rows]
        complete = ~np.isnan(sub).any(axis=1)
        rows = rows[complete]
        sub = sub[complete]
        if len(rows) < 10 * len(names):
            log.info("skipping ICS on %s: only %d complete rows", sid, len(rows))
            continue
        if any(np.ptp(sub[:, j]) == 0 for j in range(sub.shape[1])):
            log.info("skipping ICS on %s: constant channel", sid)
            continue
        try:
            local = detect_outliers_ics(sub, m=m, alpha=alpha)
        except ValueError as exc:
            log.info("skipping ICS on %s: %s", sid, exc)
            continue
        flags.extend((int(rows[i]), None) for i in local)
    flags.sort(key=lambda f: f[0])
    return flags


def verify_outliers(frame: TimeSeriesFrame, flags, kb: KnowledgeBase, events,
                    window_minutes: int = 60):
    """Judge each flagged point against the fault picture.

    Points within the pre-onset window of a blocking event, or inside
    its active sequence, are true precursors and kept. Isolated points
    whose neighbors sit inside their operating envelopes are corrected
    by interpolation. Everything else is dropped as irrelevant.
    """
    t_int = frame.timestamps.astype("int64")
    windows = []
    for e in events:
        if e.severity != BLOCKING:
            continue
        onset = e.onset.astype("int64")
        end = onset
        for s, stop in _instances(frame):
            if (frame.cycle[s] == e.cycle and frame.sequence[s] == e.sequence_id
                    and t_int[s] <= onset < t_int[stop - 1] + 60):
                end = t_int[stop - 1]
                break
        windows.append((onset - window_minutes * 60, end))

    flagged_rows = {}
    for row, channel in flags:
        flagged_rows.setdefault(row, set()).add(channel)

    def is_relevant(row: int) -> bool:
        ts = t_int[row]
        return any(lo <= ts <= hi for lo, hi in windows)

    def neighbor_ok(row: int, channel: str) -> bool:
        if row < 0 or row >= len(frame):
            return False
        if channel in flagged_rows.get(row, ()) or None in flagged_rows.get(row, ()):
            return False
        if channel is None:
            verdicts = envelope_check(frame.row(row), kb)
            return OUT_OF_ENVELOPE not in verdicts.values()
        value = frame.channels[channel][row]
        if np.isnan(value):
            return False
        return envelope_check(frame.row(row), kb).get(channel) != OUT_OF_ENVELOPE

    verdicts = []
    seen = set()
    for row, channel in flags:
        if channel is None and any(c is not None for c in flagged_rows[row]):
            # a channel-specific flag on the same row takes precedence
            continue
        if (row, channel) in seen:
            continue
        seen.add((row, channel))
        if is_relevant(row):
            verdicts.append(OutlierVerdict(row, channel, VERDICT_TAGGED))
        elif neighbor_ok(row - 1, channel) and neighbor_ok(row + 1, channel):
            if channel is None:
                verdicts.append(OutlierVerdict(row, None, VERDICT_CORRECTED))
            else:
                left = frame.channels[channel][row - 1]
                right = frame.channels[channel][row + 1]
                verdicts.append(OutlierVerdict(
                    row, channel, VERDICT_CORRECTED, replacement=float((left + right) / 2)))
        else:
            verdicts.append(OutlierVerdict(row, channel, VERDICT_DROPPED))
    return verdicts


def apply_verdicts(frame: TimeSeriesFrame, verdicts) -> TimeSeriesFrame:
    """Correct or drop rows per the verdict list; tagged points pass through."""
    channels = {k: v.copy() for k, v in frame.channels.items()}
    drop = set()
    for v in verdicts:
        if v.verdict == VERDICT_CORRECTED:
            if v.channel is not None:
                channels[v.channel][v.index] = v.replacement
            else:
                for name in channels:
                    left = channels[name][v.index - 1]
                    right = channels[name][v.index + 1]
                    channels[name][v.index] = (left + right) / 2
        elif v.verdict == VERDICT_DROPPED:
            drop.add(v.index)
    out = TimeSeriesFrame(
        timestamps=frame.timestamps, channels=channels, units=dict(frame.units),
        logs=dict(frame.logs), step_minutes=frame.step_minutes)
    if drop:
        keep = np.ones(len(frame), dtype=bool)
        keep[list(drop)] = False
        out = out.take(np.flatnonzero(keep))
    return out
