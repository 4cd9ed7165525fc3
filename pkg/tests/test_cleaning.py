"""Gap classification, imputation, outlier detection, and verdicts."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdmpipe import (
    apply_verdicts,
    classify_gaps,
    detect_outliers_ics,
    detect_outliers_iqr,
    drop_intervals,
    impute_single_sensor,
    verify_outliers,
)
from pdmpipe.cleaning import detrended_iqr_flags, ics_flags
from pdmpipe.knowledge import BLOCKING, CYCLE_STOP, FaultEvent
from helpers import quiet_frame, segment_rows


def blank(frame, rows, channels=None):
    for name in channels or frame.channels:
        frame.channels[name][rows] = np.nan


class TestClassifyGaps:
    def test_causes_and_dispositions(self):
        frame = quiet_frame(cycles=2)
        blank(frame, slice(100, 150))                      # active, all channels
        blank(frame, slice(2750, 2800))                    # idle, all channels
        blank(frame, slice(300, 330), ["temp_external_a"])  # one channel
        blank(frame, slice(400, 410),
              ["pressure_internal_a", "temp_internal"])     # several, not all

        report = classify_gaps(frame, "s2")
        by_cause = {}
        for gap in report.intervals:
            by_cause.setdefault(gap.cause, []).append(gap)

        assert len(by_cause["BlanketMaintenance"]) == 1
        gap = by_cause["BlanketMaintenance"][0]
        assert gap.disposition == "Delete"
        assert gap.start == frame.timestamps[100]
        assert gap.end == frame.timestamps[149]

        assert [g.disposition for g in by_cause["NonUse"]] == ["Delete"]
        assert [g.disposition for g in by_cause["Unknown"]] == ["Delete"]

        drop = by_cause["SingleSensorDropout"][0]
        assert drop.channel == "temp_external_a"
        assert drop.disposition == "Reconstruct"

    def test_data_driven_scenario_deletes_dropouts_too(self):
        frame = quiet_frame()
        blank(frame, slice(300, 330), ["temp_external_a"])
        report = classify_gaps(frame, "s1")
        assert [g.disposition for g in report.intervals] == ["Delete"]

    def test_intervals_sorted_by_start(self):
        frame = quiet_frame()
        blank(frame, slice(500, 520), ["temp_external_a"])
        blank(frame, slice(100, 120))
        report = classify_gaps(frame, "s2")
        starts = [g.start for g in report.intervals]
        assert starts == sorted(starts)

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ValueError, match="scenario"):
            classify_gaps(quiet_frame(), "s3")


class TestImpute:
    def make_frame(self, cycles=4):
        frame = quiet_frame(cycles=cycles)
        minute = np.arange(len(frame)) % 2910
        values = frame.cycle * 1000.0 + minute
        return frame.with_channel("temp_external_a", values, "degC")

    def gap_for(self, frame, rows):
        from pdmpipe.cleaning import GapInterval
        return GapInterval(start=frame.timestamps[rows[0]],
                           end=frame.timestamps[rows[-1]],
                           cause="SingleSensorDropout",
                           disposition="Reconstruct",
                           channel="temp_external_a")

    def test_fills_from_same_offset_in_prior_cycles(self):
        frame = self.make_frame()
        rows = segment_rows(frame, 4, "S09")[10:20]
        frame.channels["temp_external_a"][rows] = np.nan
        gap = self.gap_for(frame, rows)
        out = impute_single_sensor(frame, gap, k=3)
        minute = np.arange(len(frame)) % 2910
        # donors are cycles 1..3 at the same in-sequence offset
        assert np.array_equal(out.channels["temp_external_a"][rows],
                              2000.0 + minute[rows])

    def test_k_limits_the_donor_window(self):
        frame = self.make_frame()
        rows = segment_rows(frame, 4, "S09")[10:20]
        frame.channels["temp_external_a"][rows] = np.nan
        out = impute_single_sensor(frame, self.gap_for(frame, rows), k=2)
        minute = np.arange(len(frame)) % 2910
        assert np.array_equal(out.channels["temp_external_a"][rows],
                              2500.0 + minute[rows])

    def test_no_history_falls_back_to_channel_median(self):
        frame = self.make_frame()
        rows = segment_rows(frame, 1, "S09")[10:20]
        values = frame.channels["temp_external_a"]
        values[rows] = np.nan
        expected = float(np.median(values[~np.isnan(values)]))
        out = impute_single_sensor(frame, self.gap_for(frame, rows), k=3)
        assert np.array_equal(out.channels["temp_external_a"][rows],
                              np.full(10, expected))

    def test_validation(self):
        frame = self.make_frame(cycles=1)
        rows = segment_rows(frame, 1, "S09")[:5]
        gap = self.gap_for(frame, rows)
        with pytest.raises(ValueError, match="k must be"):
            impute_single_sensor(frame, gap, k=0)
        from dataclasses import replace
        with pytest.raises(ValueError, match="single-sensor"):
            impute_single_sensor(frame, replace(gap, channel=None))


class TestDropIntervals:
    def test_removes_exactly_the_delete_rows(self):
        frame = quiet_frame()
        blank(frame, slice(100, 150))
        blank(frame, slice(300, 330), ["temp_external_a"])
        report = classify_gaps(frame, "s2")
        out = drop_intervals(frame, report)
        assert len(out) == len(frame) - 50
        kept = set(out.timestamps.astype("int64"))
        assert frame.timestamps[99].astype("int64") in kept
        assert frame.timestamps[100].astype("int64") not in kept
        assert frame.timestamps[300].astype("int64") in kept  # reconstruct, kept


class TestIqrDetector:
    @given(st.lists(st.floats(min_value=-1e9, max_value=1e9,
                              allow_nan=False), min_size=1, max_size=200),
           st.floats(min_value=0.0, max_value=10.0))
    def test_matches_fence_oracle(self, values, k):
        x = np.array(values)
        got = detect_outliers_iqr(x, k)
        q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
        lo, hi = q1 - k * (q3 - q1), q3 + k * (q3 - q1)
        expected = [i for i, v in enumerate(values) if v < lo or v > hi]
        assert got.tolist() == expected

    def test_missing_values_never_flagged(self):
        x = np.array([1.0, np.nan, 1.0, 1.0, 100.0, np.nan])
        assert detect_outliers_iqr(x, 1.5).tolist() == [4]

    def test_all_missing_flags_nothing(self):
        assert detect_outliers_iqr(np.array([np.nan, np.nan])).size == 0

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            detect_outliers_iqr(np.arange(5.0), -1.0)


class TestIcsDetector:
    def test_flags_a_gross_multivariate_outlier(self):
        rng = np.random.default_rng(42)
        X = rng.standard_normal((400, 3))
        X[37] = [15.0, 15.0, 15.0]
        flags = detect_outliers_ics(X, m=2, alpha=0.001)
        assert 37 in flags
        assert len(flags) <= 5

    def test_validation(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((25, 3))
        with pytest.raises(ValueError, match="rows"):
            detect_outliers_ics(X)  # needs 10 rows per channel
        X = rng.standard_normal((50, 3))
        with pytest.raises(ValueError, match="m must be"):
            detect_outliers_ics(X, m=4)
        with pytest.raises(ValueError, match="alpha"):
            detect_outliers_ics(X, alpha=0.0)
        X[5, 1] = np.nan
        with pytest.raises(ValueError, match="missing"):
            detect_outliers_ics(X)
        Y = rng.standard_normal((50, 1))
        with pytest.raises(ValueError, match="singular"):
            detect_outliers_ics(np.hstack([Y, Y]), m=1)


class TestScreeningFlags:
    def test_spike_inside_long_instance_is_flagged(self):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S11")
        frame.channels["pressure_internal_a"][rows[600]] += 800.0
        flags = detrended_iqr_flags(frame, k=4.0)
        assert (int(rows[600]), "pressure_internal_a") in flags

    def test_instance_edges_are_exempt(self):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S11")
        frame.channels["pressure_internal_a"][rows[5]] += 800.0
        assert detrended_iqr_flags(frame, k=4.0) == []

    def test_short_instances_are_skipped(self):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S04")   # 15 min < screening window
        frame.channels["pressure_internal_a"][rows[7]] += 800.0
        assert detrended_iqr_flags(frame, k=4.0) == []

    def test_whole_row_anomaly_found_by_ics(self):
        rng = np.random.default_rng(7)
        frame = quiet_frame()
        for name in frame.channels:
            frame.channels[name] += rng.standard_normal(len(frame))
        rows = segment_rows(frame, 1, "S09")
        frame.channels["temp_external_a"][rows[200]] += 40.0
        frame.channels["pressure_internal_b"][rows[200]] += 40.0
        flags = ics_flags(frame, m=2, alpha=2e-5)
        assert (int(rows[200]), None) in flags


class TestVerifyOutliers:
    def make_event(self, frame, onset_row):
        return FaultEvent(
            onset=frame.timestamps[onset_row], cycle=1, sequence_id="S10",
            fault_name="Needle Valve Fault", cause="needle valve clogging",
            severity=BLOCKING, consequence=CYCLE_STOP)

    def test_pre_onset_point_is_tagged(self, kb):
        frame = quiet_frame()
        s10 = segment_rows(frame, 1, "S10")
        event = self.make_event(frame, int(s10[5]))
        flagged = int(s10[5]) - 30
        verdicts = verify_outliers(frame, [(flagged, "pressure_internal_b")],
                                   kb, [event], window_minutes=60)
        assert [(v.index, v.verdict) for v in verdicts] == [
            (flagged, "TaggedTrueRelevant")]

    def test_isolated_point_with_clean_neighbors_is_corrected(self, kb):
        frame = quiet_frame()
        row = int(segment_rows(frame, 1, "S11")[600])
        frame.channels["pressure_internal_a"][row] += 800.0
        verdicts = verify_outliers(frame, [(row, "pressure_internal_a")],
                                   kb, [])
        assert len(verdicts) == 1
        v = verdicts[0]
        assert v.verdict == "CorrectedFalsePositive"
        assert v.replacement == 1000.0   # mean of the untouched neighbors

    def test_point_with_suspect_neighbor_is_dropped(self, kb):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S11")
        flags = [(int(rows[600]), "pressure_internal_a"),
                 (int(rows[601]), "pressure_internal_a")]
        verdicts = verify_outliers(frame, flags, kb, [])
        assert [v.verdict for v in verdicts] == ["DroppedTrueIrrelevant"] * 2

    def test_out_of_envelope_neighbor_blocks_correction(self, kb):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S09")
        row = int(rows[500])
        frame.channels["temp_internal"][row + 1] = 350.0   # outside the band
        verdicts = verify_outliers(frame, [(row, "temp_internal")], kb, [])
        assert [v.verdict for v in verdicts] == ["DroppedTrueIrrelevant"]

    def test_one_verdict_per_point_and_channel_precedence(self, kb):
        frame = quiet_frame()
        row = int(segment_rows(frame, 1, "S11")[600])
        flags = [(row, "pressure_internal_a"), (row, "pressure_internal_a"),
                 (row, None)]
        verdicts = verify_outliers(frame, flags, kb, [])
        assert len(verdicts) == 1
        assert verdicts[0].channel == "pressure_internal_a"


class TestApplyVerdicts:
    def test_corrections_drops_and_passthrough(self, kb):
        frame = quiet_frame()
        rows = segment_rows(frame, 1, "S11")
        spike = int(rows[600])
        doomed = int(rows[700])
        tagged = int(rows[800])
        frame.channels["pressure_internal_a"][spike] += 800.0
        frame.channels["pressure_internal_a"][tagged] += 123.0
        from pdmpipe.cleaning import OutlierVerdict
        verdicts = [
            OutlierVerdict(spike, "pressure_internal_a",
                           "CorrectedFalsePositive", replacement=1000.0),
            OutlierVerdict(doomed, "pressure_internal_a",
                           "DroppedTrueIrrelevant"),
            OutlierVerdict(tagged, "pressure_internal_a",
                           "TaggedTrueRelevant"),
        ]
        out = apply_verdicts(frame, verdicts)
        assert len(out) == len(frame) - 1
        t_out = out.timestamps.astype("int64")
        assert frame.timestamps[doomed].astype("int64") not in set(t_out)
        idx = np.flatnonzero(t_out == frame.timestamps[spike].astype("int64"))[0]
        assert out.channels["pressure_internal_a"][idx] == 1000.0
        idx = np.flatnonzero(t_out == frame.timestamps[tagged].astype("int64"))[0]
        assert out.channels["pressure_internal_a"][idx] == 1123.0

    def test_whole_row_correction_interpolates_every_channel(self):
        frame = quiet_frame()
        row = int(segment_rows(frame, 1, "S11")[50])
        for name in frame.channels:
            frame.channels[name][row] += 77.0
        from pdmpipe.cleaning import OutlierVerdict
        out = apply_verdicts(frame, [OutlierVerdict(row, None,
                                                    "CorrectedFalsePositive")])
        for name in out.channels:
            left = frame.channels[name][row - 1]
            right = frame.channels[name][row + 1]
            assert out.channels[name][row] == (left + right) / 2
