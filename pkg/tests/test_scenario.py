import dataclasses

import numpy as np
import pytest

from isacguard.scenario import (
    AttackKind,
    AttackSpec,
    PolicyConfig,
    ScenarioConfig,
    VehicleSpec,
    generate_trace,
    inject_attack,
    intersection_config,
    run_e2e,
    straight_road_map,
)
from isacguard.sentinel import SPEED_OF_LIGHT, AnomalyEngine


def _run_engine(trace):
    cfg = trace.config
    engine = AnomalyEngine(cfg.roadmap, cfg.sensor_position)
    flags = []
    for step in trace.steps:
        flags.extend(engine.observe_step(step.measurements, step.reports))
    return flags


def test_stationary_vehicle_has_near_zero_doppler():
    cfg = dataclasses.replace(
        intersection_config(duration_s=3.0),
        vehicles=(VehicleSpec("v1", (-20.0, -1.5), 0.0, 0),),
    )
    trace = generate_trace(cfg, np.random.default_rng(0))
    doppler = [s.measurements[0].doppler_hz for s in trace.steps]
    assert abs(np.mean(doppler)) < 3.0 * cfg.doppler_noise_hz / np.sqrt(len(doppler))


def test_vehicle_closing_on_sensor_matches_doppler_formula():
    cfg = dataclasses.replace(
        intersection_config(duration_s=3.0),
        vehicles=(VehicleSpec("v1", (-80.0, 0.0), 20.0, 0),),
        sensor_position=(100.0, 0.0),
    )
    trace = generate_trace(cfg, np.random.default_rng(1))
    doppler = np.array([s.measurements[0].doppler_hz for s in trace.steps])
    expected = 20.0 * cfg.carrier_hz / SPEED_OF_LIGHT  # 1868.6 Hz, approaching
    assert np.mean(doppler) == pytest.approx(-expected, abs=5.0)


def test_same_seed_reproduces_the_trace_exactly():
    cfg = intersection_config(duration_s=2.0)
    t1 = generate_trace(cfg, np.random.default_rng(2))
    t2 = generate_trace(cfg, np.random.default_rng(2))
    assert t1.steps == t2.steps


def test_off_map_vehicle_is_rejected():
    cfg = dataclasses.replace(
        intersection_config(), vehicles=(VehicleSpec("v1", (0.0, 30.0), 10.0, 0),)
    )
    with pytest.raises(ValueError, match="off-map"):
        generate_trace(cfg, np.random.default_rng(0))


def test_attack_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.RIS_SHIFT, 2.0, 2.0)
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.RIS_SHIFT, -1.0, 2.0)
    with pytest.raises(ValueError):
        AttackSpec("jam_everything", 0.0, 1.0)


def test_attack_leaves_everything_outside_its_window_untouched():
    cfg = intersection_config(duration_s=4.0)
    benign = generate_trace(cfg, np.random.default_rng(3))
    spec = AttackSpec(AttackKind.RIS_SHIFT, 1.0, 2.0, {"shift_deg": 40.0})
    attacked = inject_attack(benign, spec, np.random.default_rng(4))
    for b, a in zip(benign.steps, attacked.steps):
        if spec.start_s <= b.t < spec.end_s:
            assert b.measurements != a.measurements
        else:
            assert b.measurements == a.measurements
            assert b.reports == a.reports


def test_ris_shift_is_flagged_within_one_step():
    cfg = intersection_config(duration_s=4.0)
    trace = generate_trace(cfg, np.random.default_rng(5))
    spec = AttackSpec(AttackKind.RIS_SHIFT, 2.0, 3.0, {"shift_deg": 40.0})
    flags = _run_engine(inject_attack(trace, spec, np.random.default_rng(6)))
    jumps = [f for f in flags if f.explanation.startswith("aoa_jump")]
    assert jumps and min(f.timestamp for f in jumps) <= spec.start_s + cfg.step_s


def test_ghost_target_produces_unmatched_track_flags():
    cfg = intersection_config(duration_s=4.0)
    trace = generate_trace(cfg, np.random.default_rng(7))
    spec = AttackSpec(AttackKind.GHOST_TARGET, 2.0, 3.0)
    flags = _run_engine(inject_attack(trace, spec, np.random.default_rng(8)))
    ghost = [f for f in flags if f.source_id == "ghost"]
    assert ghost and all(f.explanation.startswith("unmatched_track") for f in ghost)


def test_replay_attack_is_flagged_and_needs_history():
    cfg = intersection_config(duration_s=5.0)
    trace = generate_trace(cfg, np.random.default_rng(9))
    spec = AttackSpec(AttackKind.REPLAY, 2.0, 3.5)
    flags = _run_engine(inject_attack(trace, spec, np.random.default_rng(10)))
    assert any(f.explanation.startswith("replay") for f in flags)
    early = AttackSpec(AttackKind.REPLAY, 0.5, 2.0)
    with pytest.raises(ValueError, match="history"):
        inject_attack(trace, early, np.random.default_rng(11))


def test_pilot_spoof_biases_aoa_and_raises_keygen_telemetry():
    cfg = intersection_config(duration_s=4.0)
    benign = generate_trace(cfg, np.random.default_rng(12))
    spec = AttackSpec(AttackKind.PILOT_SPOOF, 2.0, 3.0, {"bias_deg": 8.0, "eve_agreement": 0.6})
    attacked = inject_attack(benign, spec, np.random.default_rng(13))
    for b, a in zip(benign.steps, attacked.steps):
        if spec.start_s <= b.t < spec.end_s:
            assert a.keygen_eve_agreement == 0.6
            assert a.measurements[0].aoa_deg == pytest.approx(b.measurements[0].aoa_deg + 8.0)
        else:
            assert a.keygen_eve_agreement == b.keygen_eve_agreement


def test_window_must_overlap_the_trace():
    cfg = intersection_config(duration_s=2.0)
    trace = generate_trace(cfg, np.random.default_rng(14))
    with pytest.raises(ValueError):
        inject_attack(trace, AttackSpec(AttackKind.RIS_SHIFT, 5.0, 6.0), np.random.default_rng(0))


def test_benign_e2e_emits_no_actions():
    cfg = intersection_config()
    log = run_e2e(cfg, [], PolicyConfig(), np.random.default_rng(15))
    assert log.summary["total_actions"] == 0
    assert log.summary["illegitimate_attempts"] == 0


def test_e2e_event_log_is_byte_identical_per_seed():
    cfg = intersection_config(duration_s=3.0)
    attacks = [AttackSpec(AttackKind.IMPERSONATION, 1.0, 2.0)]
    l1 = run_e2e(cfg, attacks, PolicyConfig(), np.random.default_rng(16), seed_note=16)
    l2 = run_e2e(cfg, attacks, PolicyConfig(), np.random.default_rng(16), seed_note=16)
    assert l1.to_jsonl() == l2.to_jsonl()


def test_impersonation_triggers_force_full_hla_quickly():
    cfg = intersection_config()
    attacks = [AttackSpec(AttackKind.IMPERSONATION, 2.0, 3.5)]
    log = run_e2e(cfg, attacks, PolicyConfig(), np.random.default_rng(17))
    forced = [e for e in log.events if e["kind"] == "action" and e["action"] == "force_full_hla"]
    assert forced and forced[0]["t"] <= 2.0 + 3 * cfg.step_s


def test_adaptation_reduces_illegitimate_acceptance_on_this_seed():
    cfg = intersection_config()
    attacks = [
        AttackSpec(AttackKind.IMPERSONATION, 1.0, 4.5, {"stolen_credentials": True, "angle_offset_deg": 4.0})
    ]
    on = run_e2e(cfg, attacks, PolicyConfig(adapt_enabled=True), np.random.default_rng(18))
    off = run_e2e(cfg, attacks, PolicyConfig(adapt_enabled=False), np.random.default_rng(18))
    assert off.summary["illegitimate_acceptance_rate"] > 0
    assert on.summary["illegitimate_acceptance_rate"] < off.summary["illegitimate_acceptance_rate"]


def test_event_log_header_and_schema():
    cfg = intersection_config(duration_s=1.0)
    log = run_e2e(cfg, [], PolicyConfig(), np.random.default_rng(19), seed_note=19)
    text = log.to_jsonl()
    first = text.splitlines()[0]
    assert '"schema":"isacguard.eventlog/1"' in first and '"seed":19' in first


def test_scenario_config_validation():
    road = straight_road_map()
    with pytest.raises(ValueError):
        ScenarioConfig(duration_s=1.0, step_s=0.0, roadmap=road, vehicles=(VehicleSpec("v", (0, 0), 1, 0),), sensor_position=(0, -40))
    with pytest.raises(ValueError):
        ScenarioConfig(duration_s=0.01, step_s=0.1, roadmap=road, vehicles=(VehicleSpec("v", (0, 0), 1, 0),), sensor_position=(0, -40))


def test_benign_traces_pass_context_check_by_construction():
    from isacguard.sentinel import context_check

    cfg = intersection_config()
    for seed in (20, 21, 22):
        trace = generate_trace(cfg, np.random.default_rng(seed))
        for step in trace.steps:
            for rep in step.reports:
                assert context_check(rep, cfg.roadmap, 25.0, 0.2) == []


def test_force_full_hla_fires_within_three_steps_across_seeds():
    cfg = intersection_config()
    attacks = [AttackSpec(AttackKind.IMPERSONATION, 2.0, 3.5)]
    hits = 0
    for seed in range(100):
        log = run_e2e(cfg, attacks, PolicyConfig(), np.random.default_rng((31, seed)))
        forced = [e for e in log.events if e["kind"] == "action" and e["action"] == "force_full_hla"]
        if forced and forced[0]["t"] <= 2.0 + 3 * cfg.step_s:
            hits += 1
    assert hits >= 90, f"force_full_hla within 3 steps in only {hits}/100 runs"
