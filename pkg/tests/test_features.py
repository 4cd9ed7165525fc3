"""Reduction, knowledge integration, transforms, and dataset curation."""

from __future__ import annotations

import numpy as np
import pytest

from pdmpipe import (
    CuratedDataset,
    annotate_faults,
    add_statistical_features,
    build_dataset,
    correlation_matrix,
    encode_sequence,
    pca,
    prioritize,
    reconstruct_target,
    select_balance_window,
    select_features,
    standardize,
)
from pdmpipe.features import PcaResult
from pdmpipe.knowledge import ACKNOWLEDGE, BLOCKING, CYCLE_STOP, NON_BLOCKING, FaultEvent
from helpers import quiet_frame, segment_rows


class TestCorrelation:
    def test_matches_numpy_on_random_input(self):
        X = np.random.default_rng(3).standard_normal((50, 4))
        assert np.allclose(correlation_matrix(X), np.corrcoef(X, rowvar=False))

    def test_constant_column_yields_zeros(self):
        X = np.column_stack([np.arange(10.0), np.full(10, 7.0)])
        corr = correlation_matrix(X)
        assert corr[0, 0] == 1.0
        assert corr[1, 1] == 0.0
        assert corr[0, 1] == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            correlation_matrix(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            correlation_matrix(np.array([[1.0, np.nan], [2.0, 3.0]]))


class TestPca:
    @pytest.mark.parametrize("seed,n,d", [(0, 40, 3), (1, 200, 8), (2, 64, 12)])
    def test_loadings_are_orthonormal(self, seed, n, d):
        X = np.random.default_rng(seed).standard_normal((n, d))
        result = pca(X, 0.95)
        L = result.loadings
        assert np.abs(L.T @ L - np.eye(L.shape[1])).max() <= 1e-9

    def test_explained_sums_to_one_and_descends(self):
        X = np.random.default_rng(5).standard_normal((100, 6))
        result = pca(X)
        assert abs(result.explained.sum() - 1.0) < 1e-12
        assert np.all(np.diff(result.eigenvalues) <= 1e-12)

    def test_retained_is_the_smallest_sufficient_prefix(self):
        X = np.random.default_rng(6).standard_normal((120, 7))
        threshold = 0.9
        result = pca(X, threshold)
        cumulative = np.cumsum(result.explained)
        assert cumulative[result.retained - 1] >= threshold - 1e-12
        if result.retained > 1:
            assert cumulative[result.retained - 2] < threshold

    def test_sign_convention_is_deterministic(self):
        X = np.random.default_rng(7).standard_normal((60, 4))
        result = pca(X)
        for j in range(result.loadings.shape[1]):
            i = int(np.argmax(np.abs(result.loadings[:, j])))
            assert result.loadings[i, j] > 0

    def test_validation(self):
        X = np.random.default_rng(8).standard_normal((30, 3))
        with pytest.raises(ValueError):
            pca(X, 0.0)
        with pytest.raises(ValueError):
            pca(X[:1])
        with pytest.raises(ValueError, match="variance"):
            pca(np.zeros((10, 2)))


class TestSelectFeatures:
    def make_result(self, loadings):
        loadings = np.asarray(loadings, dtype=float)
        k = loadings.shape[1]
        return PcaResult(mean=np.zeros(len(loadings)), loadings=loadings,
                         eigenvalues=np.ones(len(loadings)),
                         explained=np.full(len(loadings), 1.0 / len(loadings)),
                         retained=k)

    def test_low_loading_channels_dropped_with_note(self):
        names = ["a", "b", "c"]
        result = self.make_result([[0.9], [0.5], [0.1]])
        sel = select_features(names, result, np.eye(3), kb=None, tau=0.30)
        assert sel.selected == ("a", "b")
        assert any("dropped c" in note for note in sel.notes)

    def test_redundant_pair_collapses_to_strongest(self, kb):
        names = ["temp_external_b", "temp_external_e", "x"]
        result = self.make_result([[0.6], [0.8], [0.9]])
        sel = select_features(names, result, np.eye(3), kb=kb, tau=0.30)
        assert "temp_external_e" in sel.selected
        assert "temp_external_b" not in sel.selected

    def test_blocking_rule_channels_kept_despite_low_loading(self, kb):
        names = ["angle_platform", "x"]
        result = self.make_result([[0.05], [0.9]])
        sel = select_features(names, result, np.eye(2), kb=kb, tau=0.30)
        assert "angle_platform" in sel.selected
        assert any("blocking" in note for note in sel.notes)

    def test_without_kb_no_force_keep(self):
        names = ["angle_platform", "x"]
        result = self.make_result([[0.05], [0.9]])
        sel = select_features(names, result, np.eye(2), kb=None, tau=0.30)
        assert sel.selected == ("x",)

    def test_empty_selection_rejected(self):
        result = self.make_result([[0.05], [0.01]])
        with pytest.raises(ValueError, match="every channel"):
            select_features(["a", "b"], result, np.eye(2), kb=None, tau=0.30)


class TestStandardize:
    def test_fit_rows_have_zero_mean_unit_std(self):
        frame = quiet_frame()
        rng = np.random.default_rng(11)
        for name in frame.channels:
            frame.channels[name] += rng.standard_normal(len(frame))
        fit = np.arange(len(frame)) < int(0.6 * len(frame))
        out, scaler = standardize(frame, fit)
        for name in out.channels:
            values = out.channels[name][fit]
            assert abs(values.mean()) <= 1e-9
            assert abs(values.std() - 1.0) <= 1e-9
            assert out.units[name] == "z"
        assert set(scaler) == set(frame.channels)

    def test_held_out_rows_use_the_fit_moments(self):
        frame = quiet_frame()
        fit = np.arange(len(frame)) < 1000
        values = frame.channels["temp_internal"].copy()
        out, scaler = standardize(frame, fit)
        mean, std = scaler["temp_internal"]
        assert np.allclose(out.channels["temp_internal"],
                           (values - mean) / std)

    def test_zero_variance_channel_divides_by_one(self):
        frame = quiet_frame()
        fit = np.ones(len(frame), dtype=bool)
        out, scaler = standardize(frame, fit)
        assert scaler["temp_external_a"][1] == 1.0
        assert np.allclose(out.channels["temp_external_a"], 0.0)

    def test_mask_validation(self):
        frame = quiet_frame()
        with pytest.raises(ValueError):
            standardize(frame, np.zeros(len(frame), dtype=bool))
        with pytest.raises(ValueError):
            standardize(frame, np.ones(len(frame), dtype=np.int64))


class TestStatisticalFeatures:
    def test_row_stats_match_numpy(self):
        frame = quiet_frame()
        out = add_statistical_features(frame)
        stack = np.column_stack([frame.channels[n] for n in frame.channels])
        assert np.allclose(out.channels["stat_mean"], stack.mean(axis=1))
        assert np.allclose(out.channels["stat_median"], np.median(stack, axis=1))
        assert np.allclose(out.channels["stat_variance"], stack.var(axis=1))

    def test_subset_and_validation(self):
        frame = quiet_frame()
        out = add_statistical_features(frame, over=["temp_internal"])
        assert np.allclose(out.channels["stat_variance"], 0.0)
        with pytest.raises(ValueError, match="unknown"):
            add_statistical_features(frame, over=["bogus"])


def event_at(frame, row, name, cause, severity, consequence, priority=False):
    return FaultEvent(onset=frame.timestamps[row], cycle=int(frame.cycle[row]),
                      sequence_id=str(frame.sequence[row]), fault_name=name,
                      cause=cause, severity=severity, consequence=consequence,
                      priority=priority)


class TestPrioritize:
    def make_events(self, frame, spec):
        row = int(segment_rows(frame, 1, "S10")[0])
        events = []
        for cause, severity in spec:
            name = ("Door Closure Fault" if severity == NON_BLOCKING
                    else "Needle Valve Fault")
            consequence = CYCLE_STOP if severity == BLOCKING else ACKNOWLEDGE
            events.append(event_at(frame, row, name, cause, severity,
                                   consequence))
        return events

    def test_competition_ranking_with_ties(self):
        frame = quiet_frame()
        events = self.make_events(frame, [
            ("alpha", BLOCKING), ("alpha", BLOCKING), ("alpha", BLOCKING),
            ("beta", BLOCKING), ("beta", BLOCKING), ("beta", BLOCKING),
            ("gamma", BLOCKING), ("delta", NON_BLOCKING)])
        annotated, table = prioritize(events, top_n=2)
        ranks = {row["cause"]: row["rank"] for row in table}
        assert ranks["alpha"] == 1 and ranks["beta"] == 1
        assert ranks["gamma"] == 3
        assert ranks["delta"] == 4
        flagged = {e.cause for e in annotated if e.priority}
        assert flagged == {"alpha", "beta"}

    def test_non_blocking_events_do_not_count(self):
        frame = quiet_frame()
        events = self.make_events(frame, [("delta", NON_BLOCKING)] * 5)
        _, table = prioritize(events, top_n=10)
        assert table[0]["count"] == 0

    def test_top_n_validation(self):
        with pytest.raises(ValueError):
            prioritize([], top_n=0)


class TestAnnotateAndTarget:
    def test_blocking_event_stamps_rows_from_onset(self, kb):
        frame = quiet_frame()
        s9 = segment_rows(frame, 1, "S09")
        event = event_at(frame, int(s9[890]), "Heating Fault",
                         "thermal regulation drift", BLOCKING, CYCLE_STOP,
                         priority=True)
        out = annotate_faults(frame, [event], kb)
        assert out.logs["severity"][s9[890]:s9[-1] + 1].all()
        assert out.logs["consequence"][s9[890]:s9[-1] + 1].all()
        assert out.logs["priority"][s9[890]:s9[-1] + 1].all()
        assert out.logs["cause_thermal_regulation_drift"][s9[890]:s9[-1] + 1].all()
        assert not out.logs["severity"][s9[:890]].any()
        assert not out.logs["severity"][s9[-1] + 1:].any()

    def test_non_blocking_event_stamps_cause_only(self, kb):
        frame = quiet_frame()
        s4 = segment_rows(frame, 1, "S04")
        event = event_at(frame, int(s4[3]), "Door Closure Fault",
                         "door left open", NON_BLOCKING, ACKNOWLEDGE)
        out = annotate_faults(frame, [event], kb)
        assert out.logs["cause_door_left_open"][s4[3]:s4[-1] + 1].all()
        assert not out.logs["severity"].any()
        assert not out.logs["consequence"].any()

    def test_event_with_no_surviving_rows_is_skipped(self, kb):
        frame = quiet_frame()
        s9 = segment_rows(frame, 1, "S09")
        event = event_at(frame, int(s9[890]), "Heating Fault",
                         "thermal regulation drift", BLOCKING, CYCLE_STOP)
        survived = frame.take(frame.sequence != "S09")
        out = annotate_faults(survived, [event], kb)
        assert not out.logs["severity"].any()

    def test_target_is_the_three_way_conjunction(self, kb):
        frame = quiet_frame()
        s9 = segment_rows(frame, 1, "S09")
        s4 = segment_rows(frame, 1, "S04")
        events = [
            event_at(frame, int(s9[890]), "Heating Fault",
                     "thermal regulation drift", BLOCKING, CYCLE_STOP,
                     priority=True),
            event_at(frame, int(s4[3]), "Door Closure Fault",
                     "door left open", NON_BLOCKING, ACKNOWLEDGE),
        ]
        out = reconstruct_target(annotate_faults(frame, events, kb))
        target = out.logs["target"]
        assert target[s9[890]:s9[-1] + 1].all()
        assert target.sum() == len(s9) - 890

    def test_unprioritized_blocking_event_yields_no_positives(self, kb):
        frame = quiet_frame()
        s9 = segment_rows(frame, 1, "S09")
        event = event_at(frame, int(s9[890]), "Heating Fault",
                         "thermal regulation drift", BLOCKING, CYCLE_STOP,
                         priority=False)
        out = reconstruct_target(annotate_faults(frame, [event], kb))
        assert out.logs["target"].sum() == 0

    def test_target_needs_the_knowledge_logs(self):
        with pytest.raises(ValueError, match="integrate"):
            reconstruct_target(quiet_frame())


class TestEncodersAndWindow:
    def test_sequence_codes(self):
        codes = encode_sequence(np.array(["IDLE", "S01", "S13"], dtype="U4"))
        assert codes.tolist() == [0, 1, 13]
        with pytest.raises(ValueError, match="unknown sequence"):
            encode_sequence(np.array(["S99"], dtype="U4"))

    def test_balance_window_keeps_heating_and_sampling(self):
        out = select_balance_window(quiet_frame())
        assert set(np.unique(out.sequence)) == {"S09", "S10"}


@pytest.fixture(scope="module")
def curated(sim_mid, kb):
    frame, _ = sim_mid
    return {s: build_dataset(frame, kb, s) for s in ("s1", "s2")}


KB_COLUMNS = (
    "severity", "consequence", "cause_needle_valve_clogging",
    "cause_sampling_valve_actuation_failure", "cause_thermal_regulation_drift",
    "cause_brewing_fan_failure", "cause_platform_inclination_shift",
    "cause_door_left_open", "priority")


class TestBuildDataset:
    def test_matrix_is_complete_and_binary(self, curated):
        for ds in curated.values():
            assert not np.isnan(ds.X).any()
            assert set(np.unique(ds.y)) <= {0, 1}
            assert ds.y.sum() > 0
            assert ds.X.shape[1] == len(ds.feature_names)
            assert ds.interval_minutes == 15
            assert np.all(np.diff(ds.timestamps.astype("int64")) > 0)

    def test_rows_cover_only_the_balance_window(self, curated):
        for ds in curated.values():
            assert set(np.unique(ds.sequences)) == {"S09", "S10"}

    def test_shared_context_features(self, curated):
        for ds in curated.values():
            names = ds.feature_names
            assert "sequence" in names
            assert "cycle_minute" in names
            assert "cycle" not in names
            for stat in ("stat_mean", "stat_median", "stat_variance"):
                assert stat in names

    def test_knowledge_columns_only_in_scenario_two(self, curated):
        for column in KB_COLUMNS:
            assert column in curated["s2"].feature_names
            assert column not in curated["s1"].feature_names

    def test_scenario_specific_verdict_accounting(self, curated):
        assert set(curated["s1"].verdict_counts) == {"deleted_rows"}
        assert set(curated["s2"].verdict_counts) <= {
            "CorrectedFalsePositive", "TaggedTrueRelevant",
            "DroppedTrueIrrelevant"}

    def test_scaler_covers_selected_channels(self, curated):
        for ds in curated.values():
            assert set(ds.scaler) == set(ds.selection.selected)

    def test_cycle_minute_tracks_position_within_cycle(self, curated):
        ds = curated["s1"]
        col = ds.X[:, ds.feature_names.index("cycle_minute")]
        # heating rows sit early in the cycle, sampling rows later
        heating = col[ds.sequences == "S09"]
        sampling = col[ds.sequences == "S10"]
        assert heating.max() < sampling.min()

    def test_unknown_scenario_rejected(self, sim_mid, kb):
        with pytest.raises(ValueError, match="scenario"):
            build_dataset(sim_mid[0], kb, "s9")

    def test_file_round_trip_is_exact(self, curated, tmp_path):
        ds = curated["s2"]
        ds.to_files(tmp_path / "c.csv", tmp_path / "c.json")
        back = CuratedDataset.from_files(tmp_path / "c.csv", tmp_path / "c.json")
        assert back.feature_names == ds.feature_names
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.cycles, ds.cycles)
        assert np.array_equal(back.sequences, ds.sequences)
        assert np.array_equal(back.timestamps, ds.timestamps)
        assert back.scaler == {k: (float(m), float(s))
                               for k, (m, s) in ds.scaler.items()}
