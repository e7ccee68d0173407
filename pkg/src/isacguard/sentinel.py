"""Cross-layer anomaly detection.

Three detectors over per-step sensing measurements and protocol-layer
kinematic reports:

* consistency: Doppler-inferred radial velocity against the velocity the
  node itself reports;
* spatio_temporal: feature-rate limits and exact replay of quantized
  feature windows;
* context: reported kinematics against road geometry and speed limits.

Flags fuse into a per-node score with a weighted noisy-OR.  Doppler uses a
receding-positive sign convention throughout: doppler_hz = v_radial * f_c / c
(one-way), so inversion is v = f_D * c / f_c.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0

CONSISTENCY = "consistency"
SPATIO_TEMPORAL = "spatio_temporal"
CONTEXT = "context"
DETECTORS = (CONSISTENCY, SPATIO_TEMPORAL, CONTEXT)

_AOA_QUANTUM = 0.1  # degrees, replay-matching precision
_DOPPLER_QUANTUM = 1.0  # Hz


@dataclass(frozen=True)
class Measurement:
    timestamp: float
    aoa_deg: float
    doppler_hz: float
    range_m: float
    rssi_db: float
    source_id: str


@dataclass(frozen=True)
class KinematicReport:
    timestamp: float
    position: tuple[float, float]
    velocity: tuple[float, float]
    reporter_id: str


@dataclass(frozen=True)
class RoadMap:
    """Drivable polygons with one lane heading each, plus a speed limit."""

    polygons: tuple[tuple[tuple[float, float], ...], ...]
    lane_headings_deg: tuple[float, ...]
    speed_limit_mps: float

    def __post_init__(self):
        if len(self.polygons) != len(self.lane_headings_deg):
            raise ValueError("one lane heading per polygon")
        for poly in self.polygons:
            if len(poly) < 3:
                raise ValueError("polygons need at least 3 vertices")

    def containing_lane(self, point: tuple[float, float]) -> int | None:
        for i, poly in enumerate(self.polygons):
            if _point_in_polygon(point, poly):
                return i
        return None


@dataclass(frozen=True)
class AnomalyFlag:
    detector: str
    severity: float
    explanation: str
    timestamp: float
    source_id: str = ""

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if not 0.0 <= self.severity <= 1.0:
            raise ValueError("severity lies in [0, 1]")


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds calibrated on the benign trace generator."""

    tolerance_mps: float = 2.0
    max_aoa_rate_deg_s: float = 50.0
    max_doppler_rate_hz_s: float = 500.0
    replay_window: int = 10
    heading_tol_deg: float = 25.0
    speed_margin: float = 0.2
    carrier_hz: float = 28e9
    doppler_mode: str = "one_way"


def _point_in_polygon(point: tuple[float, float], poly) -> bool:
    """Ray-cast with on-edge points counted inside."""
    x, y = point
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if min(y1, y2) <= y <= max(y1, y2):
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if cross == 0 and min(x1, x2) <= x <= max(x1, x2):
                return True
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xin > x:
                inside = not inside
    return inside


def doppler_to_radial_velocity(doppler_hz: float, carrier_hz: float, mode: str = "one_way") -> float:
    """Radial velocity implied by a Doppler shift (receding positive)."""
    if carrier_hz <= 0.0:
        raise ValueError("carrier frequency must be > 0")
    if mode == "one_way":
        return doppler_hz * SPEED_OF_LIGHT / carrier_hz
    if mode == "monostatic_echo":
        return doppler_hz * SPEED_OF_LIGHT / (2.0 * carrier_hz)
    raise ValueError(f"unknown doppler mode {mode!r}")


def consistency_check(
    m: Measurement,
    r: KinematicReport,
    sensor_position: tuple[float, float],
    tolerance_mps: float,
    carrier_hz: float = 28e9,
    mode: str = "one_way",
) -> AnomalyFlag | None:
    """Doppler-inferred radial velocity against the reported trajectory.

    The reported radial velocity is the projection of the reported velocity
    onto the sensor-to-target unit vector.  A mismatch beyond tolerance
    flags with severity min(1, |dv| / (4 * tolerance)).
    """
    dx = r.position[0] - sensor_position[0]
    dy = r.position[1] - sensor_position[1]
    dist = float(np.hypot(dx, dy))
    if dist == 0.0:
        raise ValueError("degenerate geometry: report sits on the sensor")
    v_reported = (r.velocity[0] * dx + r.velocity[1] * dy) / dist
    v_inferred = doppler_to_radial_velocity(m.doppler_hz, carrier_hz, mode)
    dv = abs(v_inferred - v_reported)
    if dv <= tolerance_mps:
        return None
    return AnomalyFlag(
        detector=CONSISTENCY,
        severity=min(1.0, dv / (4.0 * tolerance_mps)),
        explanation=f"doppler_velocity_mismatch dv={dv:.2f}m/s",
        timestamp=m.timestamp,
        source_id=m.source_id,
    )


def _quantized(m: Measurement) -> tuple[float, float]:
    return (round(m.aoa_deg / _AOA_QUANTUM) * _AOA_QUANTUM, round(m.doppler_hz / _DOPPLER_QUANTUM))


def spatio_temporal_check(
    track: list[Measurement],
    max_aoa_rate_deg_s: float,
    max_doppler_rate_hz_s: float,
    replay_window: int,
) -> list[AnomalyFlag]:
    """Rate-limit and replay analysis of one node's measurement track.

    Flags every step whose AoA or Doppler rate of change exceeds the limit,
    and every exact repetition (at 0.1 deg / 1 Hz precision) of a feature
    window seen earlier in the track.
    """
    if len(track) < 2:
        raise ValueError("track needs at least 2 points")
    times = [m.timestamp for m in track]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("track must be sorted by strictly increasing timestamp")

    flags = []
    for prev, cur in zip(track, track[1:]):
        dt = cur.timestamp - prev.timestamp
        aoa_rate = abs(cur.aoa_deg - prev.aoa_deg) / dt
        dop_rate = abs(cur.doppler_hz - prev.doppler_hz) / dt
        if aoa_rate > max_aoa_rate_deg_s:
            sev = min(1.0, aoa_rate / (4.0 * max_aoa_rate_deg_s))
            flags.append(
                AnomalyFlag(SPATIO_TEMPORAL, sev, f"aoa_jump rate={aoa_rate:.1f}deg/s", cur.timestamp, cur.source_id)
            )
        if dop_rate > max_doppler_rate_hz_s:
            sev = min(1.0, dop_rate / (4.0 * max_doppler_rate_hz_s))
            flags.append(
                AnomalyFlag(SPATIO_TEMPORAL, sev, f"doppler_jump rate={dop_rate:.0f}Hz/s", cur.timestamp, cur.source_id)
            )

    if replay_window >= 1 and len(track) >= replay_window:
        seen: dict[tuple, int] = {}
        quant = [_quantized(m) for m in track]
        for start in range(len(track) - replay_window + 1):
            window = tuple(quant[start : start + replay_window])
            first = seen.get(window)
            if first is not None and first + replay_window <= start:
                end = track[start + replay_window - 1]
                flags.append(
                    AnomalyFlag(
                        SPATIO_TEMPORAL,
                        1.0,
                        f"replay window={replay_window} first_seen_t={track[first].timestamp:g}",
                        end.timestamp,
                        end.source_id,
                    )
                )
            else:
                seen.setdefault(window, start)
    return flags


def context_check(
    r: KinematicReport,
    roadmap: RoadMap,
    heading_tol_deg: float,
    speed_margin: float,
) -> list[AnomalyFlag]:
    """Reported kinematics against road geometry and traffic rules."""
    flags = []
    lane = roadmap.containing_lane(r.position)
    if lane is None:
        flags.append(AnomalyFlag(CONTEXT, 1.0, "off_road", r.timestamp, r.reporter_id))
    speed = float(np.hypot(*r.velocity))
    if lane is not None and speed > 1.0:
        heading = float(np.degrees(np.arctan2(r.velocity[1], r.velocity[0])))
        dev = abs((heading - roadmap.lane_headings_deg[lane] + 180.0) % 360.0 - 180.0)
        if dev > heading_tol_deg:
            sev = min(1.0, dev / 90.0)
            flags.append(AnomalyFlag(CONTEXT, sev, f"heading_deviation {dev:.0f}deg", r.timestamp, r.reporter_id))
    limit = roadmap.speed_limit_mps * (1.0 + speed_margin)
    if speed > limit:
        sev = min(1.0, (speed - limit) / limit)
        flags.append(AnomalyFlag(CONTEXT, sev, f"overspeed {speed:.1f}m/s", r.timestamp, r.reporter_id))
    return flags


def fuse_flags(flags: list[AnomalyFlag], weights: dict[str, float]) -> float:
    """Weighted noisy-OR over the per-detector maximum severities."""
    if any(w < 0.0 for w in weights.values()) or sum(weights.values()) <= 0.0:
        raise ValueError("weights must be non-negative with positive sum")
    keep = 1.0
    for det in DETECTORS:
        sevs = [f.severity for f in flags if f.detector == det]
        if sevs:
            keep *= 1.0 - min(1.0, weights.get(det, 0.0) * max(sevs))
    return min(1.0, max(0.0, 1.0 - keep))


class AnomalyEngine:
    """Streaming wrapper running all three detectors step by step.

    Keeps per-node measurement history so the spatio-temporal analysis can
    look back, pairs measurements with same-step reports by node id, and
    flags measurement tracks that no report claims.  Rate and replay
    analysis is incremental but emits exactly the flags the batch
    ``spatio_temporal_check`` would produce for the accumulated track.
    """

    def __init__(self, roadmap: RoadMap, sensor_position: tuple[float, float], cfg: DetectorConfig = DetectorConfig()):
        self.roadmap = roadmap
        self.sensor_position = sensor_position
        self.cfg = cfg
        self._tracks: dict[str, list[Measurement]] = defaultdict(list)
        self._windows: dict[str, dict[tuple, int]] = defaultdict(dict)

    def _spatio_incremental(self, track: list[Measurement]) -> list[AnomalyFlag]:
        cfg = self.cfg
        flags = []
        prev, cur = track[-2], track[-1]
        dt = cur.timestamp - prev.timestamp
        if dt <= 0:
            raise ValueError("track must be sorted by strictly increasing timestamp")
        aoa_rate = abs(cur.aoa_deg - prev.aoa_deg) / dt
        dop_rate = abs(cur.doppler_hz - prev.doppler_hz) / dt
        if aoa_rate > cfg.max_aoa_rate_deg_s:
            sev = min(1.0, aoa_rate / (4.0 * cfg.max_aoa_rate_deg_s))
            flags.append(
                AnomalyFlag(SPATIO_TEMPORAL, sev, f"aoa_jump rate={aoa_rate:.1f}deg/s", cur.timestamp, cur.source_id)
            )
        if dop_rate > cfg.max_doppler_rate_hz_s:
            sev = min(1.0, dop_rate / (4.0 * cfg.max_doppler_rate_hz_s))
            flags.append(
                AnomalyFlag(SPATIO_TEMPORAL, sev, f"doppler_jump rate={dop_rate:.0f}Hz/s", cur.timestamp, cur.source_id)
            )
        w = cfg.replay_window
        if w >= 1 and len(track) >= w:
            start = len(track) - w
            window = tuple(_quantized(m) for m in track[start:])
            seen = self._windows[cur.source_id]
            first = seen.get(window)
            if first is not None and first + w <= start:
                flags.append(
                    AnomalyFlag(
                        SPATIO_TEMPORAL,
                        1.0,
                        f"replay window={w} first_seen_t={track[first].timestamp:g}",
                        cur.timestamp,
                        cur.source_id,
                    )
                )
            else:
                seen.setdefault(window, start)
        return flags

    def observe_step(self, measurements: list[Measurement], reports: list[KinematicReport]) -> list[AnomalyFlag]:
        cfg = self.cfg
        flags: list[AnomalyFlag] = []
        by_reporter = {r.reporter_id: r for r in reports}
        for m in measurements:
            rep = by_reporter.get(m.source_id)
            if rep is None:
                flags.append(
                    AnomalyFlag(CONSISTENCY, 1.0, "unmatched_track: no report for sensed node", m.timestamp, m.source_id)
                )
            else:
                f = consistency_check(m, rep, self.sensor_position, cfg.tolerance_mps, cfg.carrier_hz, cfg.doppler_mode)
                if f is not None:
                    flags.append(f)
            self._tracks[m.source_id].append(m)
            track = self._tracks[m.source_id]
            if len(track) >= 2:
                flags.extend(self._spatio_incremental(track))
        for rep in reports:
            flags.extend(context_check(rep, self.roadmap, cfg.heading_tol_deg, cfg.speed_margin))
        return flags
