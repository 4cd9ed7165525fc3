"""Telemetry generator: determinism, fault symptoms, logging gate, injection."""

from __future__ import annotations

import numpy as np
import pytest

from pdmpipe import GroundTruth, SimConfig, evaluate_rules, inject_missing, inject_outliers, simulate
from pdmpipe.simulator import MU_LOW

GATE_AT_QUARTER = MU_LOW + (1 - MU_LOW) * 0.75


def gt_pairs(gt):
    return {(g.event.cycle, g.event.fault_name) for g in gt.events}


class TestGenerator:
    def test_frame_shape_and_schema(self, sim_small):
        frame, gt = sim_small
        assert len(frame) == 6 * 2910
        assert len(frame.channels) == 9
        assert frame.units["pressure_internal_a"] == "hPa"
        assert frame.units["temp_internal"] == "degC"
        assert frame.units["angle_platform"] == "deg"
        for name in ("fault_log", "valve_0001", "valve_0002",
                     "brewing_fan", "door_z013"):
            assert name in frame.logs
        assert np.array_equal(np.unique(frame.cycle), np.arange(1, 7))

    def test_same_seed_reproduces_every_byte(self, kb):
        config = SimConfig(seed=31337, cycles=3)
        a, gt_a = simulate(config, kb)
        b, gt_b = simulate(config, kb)
        for name in a.channels:
            assert np.array_equal(a.channels[name], b.channels[name])
        for name in a.logs:
            assert np.array_equal(a.logs[name], b.logs[name])
        assert gt_a.to_dict() == gt_b.to_dict()

    def test_different_seed_changes_noise(self, kb):
        a, _ = simulate(SimConfig(seed=1, cycles=1), kb)
        b, _ = simulate(SimConfig(seed=2, cycles=1), kb)
        assert not np.array_equal(a.channels["temp_external_a"],
                                  b.channels["temp_external_a"])

    def test_scheduled_heating_fault_shows_its_symptom(self, kb, sim_small):
        frame, gt = sim_small
        rows = (frame.cycle == 3) & (frame.sequence == "S09")
        assert frame.channels["temp_internal"][rows].max() > 314.0
        heating = [g.event for g in gt.events
                   if g.event.fault_name == "Heating Fault"]
        assert [e.cycle for e in heating] == [3, 5]

    def test_rule_engine_recovers_scheduled_faults(self, kb, sim_small):
        frame, gt = sim_small
        detected = {(e.cycle, e.fault_name) for e in evaluate_rules(frame, kb)}
        assert detected == gt_pairs(gt)

    def test_ground_truth_round_trips_through_json_dict(self, sim_small):
        _, gt = sim_small
        assert GroundTruth.from_dict(gt.to_dict()) == gt


class TestLoggingGate:
    def test_lossless_logging_logs_everything(self, sim_small):
        _, gt = sim_small
        assert all(g.logged for g in gt.events)

    def test_zero_probability_logs_nothing(self, kb):
        config = SimConfig(seed=88, cycles=12, logging_probability=0.0)
        frame, gt = simulate(config, kb)
        assert len(gt.events) > 0
        assert gt.logged_events() == []
        assert frame.logs["fault_log"].sum() == 0

    def test_magnitude_gate_decides_logging(self, kb):
        config = SimConfig(seed=99, cycles=40, logging_probability=0.25)
        _, gt = simulate(config, kb)
        assert len(gt.events) > 10
        for g in gt.events:
            assert g.logged == (g.magnitude > GATE_AT_QUARTER)
        assert 0 < len(gt.logged_events()) < len(gt.events)

    def test_cooccurring_blocking_faults_share_their_magnitude(self, kb):
        config = SimConfig(seed=5, cycles=4, logging_probability=0.25,
                           schedule=((2, "needle"), (2, "heating_temp"),
                                     (3, "angle")))
        _, gt = simulate(config, kb)
        cycle2 = [g for g in gt.events if g.event.cycle == 2]
        assert len(cycle2) == 2
        assert cycle2[0].magnitude == cycle2[1].magnitude
        assert cycle2[0].logged == cycle2[1].logged

    def test_bernoulli_model_is_deterministic(self, kb):
        config = SimConfig(seed=7, cycles=20, logging_probability=0.5,
                           logging_model="bernoulli")
        _, gt_a = simulate(config, kb)
        _, gt_b = simulate(config, kb)
        assert [g.logged for g in gt_a.events] == [g.logged for g in gt_b.events]
        assert 0 < len(gt_a.logged_events()) < len(gt_a.events)

    def test_logged_events_pulse_the_fault_log(self, kb):
        config = SimConfig(seed=11, cycles=10, logging_probability=0.5,
                           schedule=tuple((c, "needle") for c in range(1, 11)))
        frame, gt = simulate(config, kb)
        pulse = frame.logs["fault_log"]
        for g in gt.events:
            cycle_rows = np.flatnonzero(frame.cycle == g.event.cycle)
            onset_row = cycle_rows[0] + 1080 + 5     # sampling starts at 1080
            end_row = cycle_rows[0] + 1320           # sampling ends at 1320
            if g.logged:
                assert pulse[onset_row:end_row].all()
                assert not pulse[cycle_rows[0]:onset_row].any()
            else:
                assert not pulse[cycle_rows].any()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(seed=1, cycles=0)
        with pytest.raises(ValueError):
            SimConfig(seed=1, logging_probability=1.5)
        with pytest.raises(ValueError):
            SimConfig(seed=1, injection={"gremlin": 0.1})
        with pytest.raises(ValueError):
            SimConfig(seed=1, cycles=3, schedule=((4, "needle"),))
        with pytest.raises(ValueError):
            SimConfig(seed=1, logging_model="coin")


class TestInjectMissing:
    def test_blanket_blanks_every_channel(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_missing(
            frame, gt, {"blanket": [{"cycle": 2, "start_minute": 100,
                                     "minutes": 120}]})
        rows = slice(2910 + 100, 2910 + 220)
        for name in out.channels:
            assert np.isnan(out.channels[name][rows]).all()
        assert not np.isnan(out.channels["temp_internal"][2910 + 99])
        blankets = [m for m in gt2.missing if m.cause == "BlanketMaintenance"]
        assert len(blankets) == 1
        assert blankets[0].start == frame.timestamps[2910 + 100]
        assert blankets[0].end == frame.timestamps[2910 + 219]

    def test_dropout_blanks_one_channel(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_missing(
            frame, gt, {"dropout": [{"cycle": 3, "channel": "temp_external_a",
                                     "start_minute": 50, "minutes": 30}]})
        rows = slice(2 * 2910 + 50, 2 * 2910 + 80)
        assert np.isnan(out.channels["temp_external_a"][rows]).all()
        assert not np.isnan(out.channels["temp_external_b"][rows]).any()
        drops = [m for m in gt2.missing if m.cause == "SingleSensorDropout"]
        assert [m.channel for m in drops] == ["temp_external_a"]

    def test_non_use_blanks_idle_stretches(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_missing(frame, gt, {"non_use": True})
        idle = out.sequence == "IDLE"
        assert np.isnan(out.channels["temp_internal"][idle]).all()
        assert not np.isnan(out.channels["temp_internal"][~idle]).any()
        assert sum(m.cause == "NonUse" for m in gt2.missing) == 6

    def test_overlapping_blankets_rejected(self, sim_small):
        frame, gt = sim_small
        spec = {"blanket": [{"cycle": 1, "start_minute": 0, "minutes": 100},
                            {"cycle": 1, "start_minute": 50, "minutes": 100}]}
        with pytest.raises(ValueError, match="overlap"):
            inject_missing(frame, gt, spec)

    def test_absent_cycle_rejected(self, sim_small):
        frame, gt = sim_small
        with pytest.raises(ValueError, match="absent cycle"):
            inject_missing(frame, gt, {"blanket": [
                {"cycle": 99, "start_minute": 0, "minutes": 10}]})

    def test_empty_scenario_is_identity(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_missing(frame, gt, {})
        assert out is frame
        assert gt2 is gt


class TestInjectOutliers:
    def test_delta_applied_and_original_recorded(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_outliers(frame, gt, [
            {"cycle": 1, "channel": "pressure_internal_b", "minute": 1900,
             "kind": "FalseSpike", "delta": 500.0}])
        point = gt2.outliers[-1]
        assert point.channel == "pressure_internal_b"
        assert point.kind == "FalseSpike"
        assert out.channels["pressure_internal_b"][1900] == point.value
        assert point.value == point.original + 500.0
        assert frame.channels["pressure_internal_b"][1900] == point.original

    def test_absolute_value_spec(self, sim_small):
        frame, gt = sim_small
        out, gt2 = inject_outliers(frame, gt, [
            {"cycle": 2, "channel": "angle_platform", "minute": 1100,
             "kind": "TrueIrrelevant", "value": 80.0}])
        assert out.channels["angle_platform"][2910 + 1100] == 80.0

    def test_point_on_missing_cell_rejected(self, sim_small):
        frame, gt = sim_small
        blanked, gt2 = inject_missing(frame, gt, {"blanket": [
            {"cycle": 1, "start_minute": 100, "minutes": 10}]})
        with pytest.raises(ValueError, match="missing cell"):
            inject_outliers(blanked, gt2, [
                {"cycle": 1, "channel": "temp_internal", "minute": 105,
                 "kind": "FalseSpike", "delta": 50.0}])

    def test_unknown_channel_and_kind_rejected(self, sim_small):
        frame, gt = sim_small
        with pytest.raises(ValueError, match="unknown channel"):
            inject_outliers(frame, gt, [
                {"cycle": 1, "channel": "bogus", "minute": 5,
                 "kind": "FalseSpike", "delta": 1.0}])
        with pytest.raises(ValueError, match="outlier kind"):
            inject_outliers(frame, gt, [
                {"cycle": 1, "channel": "temp_internal", "minute": 5,
                 "kind": "Whoops", "delta": 1.0}])
