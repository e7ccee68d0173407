import numpy as np
import pytest

from isacguard.sentinel import (
    SPEED_OF_LIGHT,
    AnomalyEngine,
    AnomalyFlag,
    DetectorConfig,
    KinematicReport,
    Measurement,
    RoadMap,
    consistency_check,
    context_check,
    doppler_to_radial_velocity,
    fuse_flags,
    spatio_temporal_check,
)

FC = 28e9

ROAD = RoadMap(
    polygons=(((-100.0, -5.0), (100.0, -5.0), (100.0, 5.0), (-100.0, 5.0)),),
    lane_headings_deg=(0.0,),
    speed_limit_mps=30.0,
)


def _meas(t, aoa=0.0, doppler=0.0, src="v1"):
    return Measurement(timestamp=t, aoa_deg=aoa, doppler_hz=doppler, range_m=50.0, rssi_db=-60.0, source_id=src)


def _report(t, pos=(50.0, 0.0), vel=(0.0, 0.0), src="v1"):
    return KinematicReport(timestamp=t, position=pos, velocity=vel, reporter_id=src)


# ---------------------------------------------------------------- doppler

def test_zero_doppler_means_zero_velocity():
    assert doppler_to_radial_velocity(0.0, FC) == 0.0


def test_one_way_doppler_conversion_oracle():
    # 2800 * c / 28e9 = 29.9792458 m/s
    assert doppler_to_radial_velocity(2800.0, FC) == pytest.approx(29.9792458, abs=1e-9)


def test_monostatic_echo_halves_the_one_way_velocity():
    assert doppler_to_radial_velocity(1000.0, FC, "monostatic_echo") == pytest.approx(
        doppler_to_radial_velocity(1000.0, FC, "one_way") / 2.0
    )


def test_doppler_rejects_zero_carrier_and_bad_mode():
    with pytest.raises(ValueError):
        doppler_to_radial_velocity(100.0, 0.0)
    with pytest.raises(ValueError):
        doppler_to_radial_velocity(100.0, FC, "sideways")


# ------------------------------------------------------------ consistency

def test_consistent_report_produces_no_flag():
    vel = (10.0, 0.0)  # radial velocity 10 m/s away from a sensor at origin
    doppler = 10.0 * FC / SPEED_OF_LIGHT
    flag = consistency_check(_meas(0.0, doppler=doppler), _report(0.0, vel=vel), (0.0, 0.0), 2.0, FC)
    assert flag is None


def test_velocity_mismatch_saturates_severity():
    # reported radial 10 m/s vs Doppler-inferred 30 m/s, tolerance 2
    doppler = 30.0 * FC / SPEED_OF_LIGHT
    flag = consistency_check(_meas(0.0, doppler=doppler), _report(0.0, vel=(10.0, 0.0)), (0.0, 0.0), 2.0, FC)
    assert flag is not None
    assert flag.severity == 1.0  # min(1, 20 / 8)
    assert flag.detector == "consistency"


def test_tangential_motion_is_consistent_with_zero_doppler():
    flag = consistency_check(_meas(0.0, doppler=0.0), _report(0.0, vel=(0.0, 15.0)), (0.0, 0.0), 2.0, FC)
    assert flag is None


def test_degenerate_geometry_raises():
    with pytest.raises(ValueError):
        consistency_check(_meas(0.0), _report(0.0, pos=(0.0, 0.0)), (0.0, 0.0), 2.0, FC)


# --------------------------------------------------------- spatio-temporal

def test_slow_drift_raises_no_flags():
    track = [_meas(0.1 * i, aoa=1.0 * i, doppler=10.0 * i) for i in range(20)]  # 10 deg/s, 100 Hz/s
    assert spatio_temporal_check(track, 50.0, 500.0, 10) == []


def test_abrupt_aoa_jump_is_flagged():
    track = [_meas(0.0, aoa=0.0), _meas(0.1, aoa=40.0)]  # 400 deg/s against a 50 deg/s limit
    flags = spatio_temporal_check(track, 50.0, 500.0, 10)
    assert len(flags) == 1
    assert flags[0].explanation.startswith("aoa_jump")
    assert flags[0].severity == 1.0  # min(1, 400 / 200)


def test_doppler_jump_is_flagged():
    track = [_meas(0.0, doppler=0.0), _meas(0.1, doppler=100.0)]  # 1000 Hz/s
    flags = spatio_temporal_check(track, 50.0, 500.0, 10)
    assert len(flags) == 1 and flags[0].explanation.startswith("doppler_jump")


def test_copied_segment_triggers_replay_flag():
    rng = np.random.default_rng(0)
    base = [_meas(0.1 * i, aoa=float(a), doppler=float(d)) for i, (a, d) in
            enumerate(zip(rng.uniform(-40, 40, 30), rng.uniform(-500, 500, 30)))]
    copied = [
        Measurement(3.0 + 0.1 * j, base[5 + j].aoa_deg, base[5 + j].doppler_hz, 50.0, -60.0, "v1")
        for j in range(10)
    ]
    flags = spatio_temporal_check(base + copied, 1e9, 1e9, 10)
    assert any(f.explanation.startswith("replay") for f in flags)


def test_fresh_track_has_no_replay_flag():
    rng = np.random.default_rng(1)
    track = [_meas(0.1 * i, aoa=float(a)) for i, a in enumerate(rng.uniform(-40, 40, 40))]
    assert not any(f.explanation.startswith("replay") for f in spatio_temporal_check(track, 1e9, 1e9, 10))


def test_unsorted_track_raises():
    with pytest.raises(ValueError):
        spatio_temporal_check([_meas(1.0), _meas(0.5)], 50.0, 500.0, 10)
    with pytest.raises(ValueError):
        spatio_temporal_check([_meas(1.0)], 50.0, 500.0, 10)


# ----------------------------------------------------------------- context

def test_clean_report_passes_context_checks():
    rep = _report(0.0, pos=(10.0, 1.0), vel=(20.0, 0.3))
    assert context_check(rep, ROAD, 25.0, 0.2) == []


def test_off_road_position_is_flagged():
    rep = _report(0.0, pos=(0.0, 55.0), vel=(10.0, 0.0))
    flags = context_check(rep, ROAD, 25.0, 0.2)
    assert any(f.explanation == "off_road" for f in flags)


def test_overspeed_is_flagged():
    rep = _report(0.0, pos=(0.0, 0.0), vel=(60.0, 0.0))  # 60 > 30 * 1.5
    flags = context_check(rep, ROAD, 25.0, 0.5)
    assert any(f.explanation.startswith("overspeed") for f in flags)


def test_heading_deviation_is_flagged_only_when_moving():
    sideways = _report(0.0, pos=(0.0, 0.0), vel=(0.0, 8.0))
    assert any(f.explanation.startswith("heading") for f in context_check(sideways, ROAD, 25.0, 0.2))
    crawling = _report(0.0, pos=(0.0, 0.0), vel=(0.0, 0.5))
    assert not any(f.explanation.startswith("heading") for f in context_check(crawling, ROAD, 25.0, 0.2))


# ------------------------------------------------------------------ fusion

def test_fusion_examples():
    assert fuse_flags([], {"consistency": 1.0}) == 0.0
    one = AnomalyFlag("consistency", 1.0, "x", 0.0, "v1")
    assert fuse_flags([one], {"consistency": 1.0}) == 1.0
    halves = [
        AnomalyFlag("consistency", 0.5, "x", 0.0, "v1"),
        AnomalyFlag("context", 0.5, "y", 0.0, "v1"),
    ]
    assert fuse_flags(halves, {"consistency": 1.0, "context": 1.0}) == pytest.approx(0.75)


def test_fusion_rejects_degenerate_weights():
    with pytest.raises(ValueError):
        fuse_flags([], {"consistency": 0.0})
    with pytest.raises(ValueError):
        fuse_flags([], {"consistency": -1.0, "context": 2.0})


def test_adding_a_flag_never_decreases_the_score():
    rng = np.random.default_rng(2)
    weights = {"consistency": 0.8, "spatio_temporal": 0.6, "context": 0.9}
    dets = ("consistency", "spatio_temporal", "context")
    flags = []
    prev = 0.0
    for _ in range(30):
        flags.append(AnomalyFlag(dets[int(rng.integers(3))], float(rng.uniform(0, 1)), "x", 0.0, "v1"))
        score = fuse_flags(flags, weights)
        assert score >= prev - 1e-12
        prev = score


def test_flag_validation():
    with pytest.raises(ValueError):
        AnomalyFlag("sonar", 0.5, "x", 0.0, "v1")
    with pytest.raises(ValueError):
        AnomalyFlag("context", 1.5, "x", 0.0, "v1")


# ------------------------------------------------------------------ engine

def test_engine_flags_unmatched_measurement_track():
    engine = AnomalyEngine(ROAD, (0.0, -40.0))
    flags = engine.observe_step([_meas(0.0, src="ghost")], [])
    assert len(flags) == 1
    assert flags[0].explanation.startswith("unmatched_track")
    assert flags[0].source_id == "ghost"


def test_engine_emits_only_current_step_flags():
    engine = AnomalyEngine(ROAD, (0.0, -40.0), DetectorConfig(max_aoa_rate_deg_s=50.0))
    rep = lambda t: _report(t, pos=(50.0, 0.0), vel=(0.0, 0.0))
    engine.observe_step([_meas(0.0, aoa=0.0)], [rep(0.0)])
    flags1 = engine.observe_step([_meas(0.1, aoa=40.0)], [rep(0.1)])
    assert any(f.explanation.startswith("aoa_jump") for f in flags1)
    flags2 = engine.observe_step([_meas(0.2, aoa=40.0)], [rep(0.2)])
    assert not any(f.explanation.startswith("aoa_jump") for f in flags2)


def test_roadmap_validation():
    with pytest.raises(ValueError):
        RoadMap(polygons=(((0.0, 0.0), (1.0, 0.0)),), lane_headings_deg=(0.0,), speed_limit_mps=10.0)
    with pytest.raises(ValueError):
        RoadMap(polygons=ROAD.polygons, lane_headings_deg=(), speed_limit_mps=10.0)


def test_engine_spatio_flags_match_batch_detector():
    rng = np.random.default_rng(3)
    aoa = np.cumsum(rng.uniform(-3, 3, 60))
    dop = np.cumsum(rng.uniform(-30, 30, 60))
    # splice in a jump and an exact replay of an earlier window
    aoa[30] += 25.0
    aoa[45:55] = aoa[10:20]
    dop[45:55] = dop[10:20]
    track = [_meas(0.1 * i, aoa=float(aoa[i]), doppler=float(dop[i])) for i in range(60)]
    cfg = DetectorConfig(max_aoa_rate_deg_s=50.0, max_doppler_rate_hz_s=500.0, replay_window=10)
    batch = spatio_temporal_check(track, cfg.max_aoa_rate_deg_s, cfg.max_doppler_rate_hz_s, cfg.replay_window)

    engine = AnomalyEngine(ROAD, (0.0, -40.0), cfg)
    streamed = []
    for m in track:
        streamed.extend(f for f in engine.observe_step([m], []) if f.detector == "spatio_temporal")
    key = lambda f: (f.timestamp, f.explanation)
    assert sorted(streamed, key=key) == sorted(batch, key=key)
