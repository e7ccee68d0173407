"""Synthetic vehicular traces, attack injection and the closed loop.

Vehicles follow constant-speed lane kinematics; per step the roadside
sensor produces array-estimated AoA, Doppler, range and RSSI measurements
while each vehicle reports (noisy) position and velocity.  Attacks from the
threat taxonomy perturb the trace strictly inside their [start, end)
windows.  ``run_e2e`` drives measure -> authenticate -> detect -> classify
-> adapt per step and emits a deterministic, ordered event log.

Angles at the sensor are bearings against a +y boresight:
bearing = atan2(x - sx, y - sy) in degrees.  Doppler uses the
receding-positive one-way convention (f_D = v_radial * f_c / c).
"""
from __future__ import annotations

import copy
import enum
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .adaptd import (
    AdaptationAction,
    KeygenHealth,
    SimKnobs,
    TrustState,
    apply_actions,
    classify_risk,
    select_actions,
    trust_update,
)
from .arraysig import ArrayConfig, estimate_aoa_batch, steering_matrix
from .authfusion import AuthOutcome, CostModel
from .sentinel import (
    SPEED_OF_LIGHT,
    AnomalyEngine,
    DetectorConfig,
    KinematicReport,
    Measurement,
    RoadMap,
    fuse_flags,
)

EVENT_LOG_SCHEMA = "isacguard.eventlog/1"
KEYGEN_EVE_BASELINE = 0.125  # floor-level adversary agreement reported when healthy


class AttackKind(enum.Enum):
    IMPERSONATION = "impersonation"
    GHOST_TARGET = "ghost_target"
    PILOT_SPOOF = "pilot_spoof"
    RIS_SHIFT = "ris_shift"
    REPLAY = "replay"


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: str
    position: tuple[float, float]
    speed_mps: float
    lane: int


@dataclass(frozen=True)
class ScenarioConfig:
    duration_s: float
    step_s: float
    roadmap: RoadMap
    vehicles: tuple[VehicleSpec, ...]
    sensor_position: tuple[float, float]
    carrier_hz: float = 28e9
    snr_db: float = 20.0
    array: ArrayConfig = ArrayConfig()
    aoa_grid_step_deg: float = 0.1
    doppler_noise_hz: float = 5.0
    range_noise_m: float = 0.5
    rssi_noise_db: float = 1.0
    report_pos_noise_m: float = 0.5
    report_vel_noise_mps: float = 0.2

    def __post_init__(self):
        if self.step_s <= 0.0:
            raise ValueError("step must be > 0")
        if self.duration_s < self.step_s:
            raise ValueError("duration must cover at least one step")
        if not self.vehicles:
            raise ValueError("scenario needs at least one vehicle")

    @property
    def num_steps(self) -> int:
        return int(round(self.duration_s / self.step_s))


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    start_s: float
    end_s: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.kind, AttackKind):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not self.start_s < self.end_s:
            raise ValueError("attack window must satisfy start < end")
        if self.start_s < 0.0:
            raise ValueError("attack window starts before the trace")


@dataclass
class TraceStep:
    t: float
    measurements: list[Measurement]
    reports: list[KinematicReport]
    credentials_valid: dict[str, bool]
    illegitimate: set[str]
    keygen_eve_agreement: float = KEYGEN_EVE_BASELINE


@dataclass
class Trace:
    config: ScenarioConfig
    steps: list[TraceStep]


def _bearing_deg(pos, sensor):
    return float(np.degrees(np.arctan2(pos[0] - sensor[0], pos[1] - sensor[1])))


def _radial_velocity(pos, vel, sensor):
    dx, dy = pos[0] - sensor[0], pos[1] - sensor[1]
    dist = float(np.hypot(dx, dy))
    if dist == 0.0:
        return 0.0
    return (vel[0] * dx + vel[1] * dy) / dist


def generate_trace(cfg: ScenarioConfig, rng: np.random.Generator) -> Trace:
    """Benign trace: lane-following kinematics plus measurement noise.

    Deterministic per generator state; all noise is drawn up front in a
    fixed order (AoA snapshot noise, Doppler, range, RSSI, report position,
    report velocity) so the step loop structure cannot perturb the draws.
    """
    headings = []
    for v in cfg.vehicles:
        if cfg.roadmap.containing_lane(v.position) is None:
            raise ValueError(f"vehicle {v.vehicle_id!r} starts off-map")
        if not 0 <= v.lane < len(cfg.roadmap.polygons):
            raise ValueError(f"vehicle {v.vehicle_id!r} references an unknown lane")
        headings.append(np.radians(cfg.roadmap.lane_headings_deg[v.lane]))

    steps = cfg.num_steps
    nveh = len(cfg.vehicles)
    times = np.arange(steps) * cfg.step_s

    pos = np.empty((steps, nveh, 2))
    vel = np.empty((steps, nveh, 2))
    for j, (v, hd) in enumerate(zip(cfg.vehicles, headings)):
        direction = np.array([np.cos(hd), np.sin(hd)])
        vel[:, j] = v.speed_mps * direction
        pos[:, j] = np.asarray(v.position) + np.outer(times, v.speed_mps * direction)

    bearings = np.degrees(
        np.arctan2(pos[..., 0] - cfg.sensor_position[0], pos[..., 1] - cfg.sensor_position[1])
    )
    dists = np.hypot(pos[..., 0] - cfg.sensor_position[0], pos[..., 1] - cfg.sensor_position[1])
    vrad = np.empty((steps, nveh))
    for j in range(nveh):
        for i in range(steps):
            vrad[i, j] = _radial_velocity(pos[i, j], vel[i, j], cfg.sensor_position)
    doppler_true = vrad * cfg.carrier_hz / SPEED_OF_LIGHT

    nelem = cfg.array.num_elements
    total = steps * nveh
    sigma = np.sqrt(10.0 ** (-cfg.snr_db / 10.0) / 2.0)
    noise = rng.standard_normal((total, nelem)) + 1j * rng.standard_normal((total, nelem))
    clamped = np.clip(bearings.reshape(-1), cfg.array.sector_min, cfg.array.sector_max)
    snapshots = steering_matrix(clamped, cfg.array) + sigma * noise
    aoa = estimate_aoa_batch(snapshots, cfg.array, cfg.aoa_grid_step_deg, refine=True).reshape(steps, nveh)

    dop_noise = cfg.doppler_noise_hz * rng.standard_normal((steps, nveh))
    rng_noise = cfg.range_noise_m * rng.standard_normal((steps, nveh))
    rssi_noise = cfg.rssi_noise_db * rng.standard_normal((steps, nveh))
    rep_pos_noise = cfg.report_pos_noise_m * rng.standard_normal((steps, nveh, 2))
    rep_vel_noise = cfg.report_vel_noise_mps * rng.standard_normal((steps, nveh, 2))

    out = []
    for i in range(steps):
        t = float(times[i])
        measurements = []
        reports = []
        for j, v in enumerate(cfg.vehicles):
            rssi = -40.0 - 20.0 * np.log10(max(dists[i, j], 1.0) / 10.0) + rssi_noise[i, j]
            measurements.append(
                Measurement(
                    timestamp=t,
                    aoa_deg=float(aoa[i, j]),
                    doppler_hz=float(doppler_true[i, j] + dop_noise[i, j]),
                    range_m=float(dists[i, j] + rng_noise[i, j]),
                    rssi_db=float(rssi),
                    source_id=v.vehicle_id,
                )
            )
            reports.append(
                KinematicReport(
                    timestamp=t,
                    position=(float(pos[i, j, 0] + rep_pos_noise[i, j, 0]), float(pos[i, j, 1] + rep_pos_noise[i, j, 1])),
                    velocity=(float(vel[i, j, 0] + rep_vel_noise[i, j, 0]), float(vel[i, j, 1] + rep_vel_noise[i, j, 1])),
                    reporter_id=v.vehicle_id,
                )
            )
        out.append(
            TraceStep(
                t=t,
                measurements=measurements,
                reports=reports,
                credentials_valid={v.vehicle_id: True for v in cfg.vehicles},
                illegitimate=set(),
            )
        )
    return Trace(config=cfg, steps=out)


def _window_steps(trace: Trace, spec: AttackSpec):
    if spec.end_s > trace.config.duration_s + 1e-9:
        raise ValueError("attack window extends past the trace")
    return [i for i, s in enumerate(trace.steps) if spec.start_s <= s.t < spec.end_s]


def inject_attack(trace: Trace, spec: AttackSpec, rng: np.random.Generator) -> Trace:
    """Return a copy of the trace with one attack applied inside its window."""
    out = Trace(config=trace.config, steps=copy.deepcopy(trace.steps))
    idxs = _window_steps(out, spec)
    if not idxs:
        raise ValueError("attack window covers no trace steps")
    cfg = trace.config
    p = spec.params

    if spec.kind is AttackKind.IMPERSONATION:
        target = p.get("target", cfg.vehicles[0].vehicle_id)
        offset = float(p.get("angle_offset_deg", 6.0))
        jitter = float(p.get("offset_jitter_deg", 2.0))
        attacker_doppler = float(p.get("attacker_doppler_hz", 0.0))
        stolen = bool(p.get("stolen_credentials", False))
        for i in idxs:
            step = out.steps[i]
            for mi, m in enumerate(step.measurements):
                if m.source_id == target:
                    wobble = jitter * rng.standard_normal()
                    step.measurements[mi] = replace(
                        m,
                        aoa_deg=m.aoa_deg + offset + wobble,
                        doppler_hz=attacker_doppler + cfg.doppler_noise_hz * rng.standard_normal(),
                    )
            step.credentials_valid[target] = stolen
            step.illegitimate.add(target)

    elif spec.kind is AttackKind.GHOST_TARGET:
        anchor = p.get("anchor", cfg.vehicles[0].vehicle_id)
        offset = float(p.get("angle_offset_deg", 12.0))
        ghost_id = p.get("ghost_id", "ghost")
        for i in idxs:
            step = out.steps[i]
            base = next(m for m in step.measurements if m.source_id == anchor)
            step.measurements.append(
                replace(
                    base,
                    aoa_deg=base.aoa_deg + offset,
                    doppler_hz=float(p.get("doppler_hz", 200.0)),
                    source_id=ghost_id,
                )
            )

    elif spec.kind is AttackKind.PILOT_SPOOF:
        bias = float(p.get("bias_deg", 8.0))
        eve_agreement = float(p.get("eve_agreement", 0.6))
        for i in idxs:
            step = out.steps[i]
            step.measurements = [replace(m, aoa_deg=m.aoa_deg + bias) for m in step.measurements]
            step.keygen_eve_agreement = eve_agreement

    elif spec.kind is AttackKind.RIS_SHIFT:
        shift = float(p.get("shift_deg", 40.0))
        for i in idxs:
            step = out.steps[i]
            step.measurements = [replace(m, aoa_deg=m.aoa_deg + shift) for m in step.measurements]

    elif spec.kind is AttackKind.REPLAY:
        span = len(idxs)
        first = idxs[0]
        if first < span:
            raise ValueError("replay window needs an equally long history before it")
        for n, i in enumerate(idxs):
            src = out.steps[first - span + n]
            step = out.steps[i]
            by_id = {m.source_id: m for m in src.measurements}
            step.measurements = [
                replace(
                    by_id[m.source_id],
                    timestamp=step.t,
                )
                if m.source_id in by_id
                else m
                for m in step.measurements
            ]
    else:  # pragma: no cover - enum exhausts kinds
        raise ValueError(f"unknown attack kind {spec.kind!r}")
    return out


@dataclass(frozen=True)
class PolicyConfig:
    adapt_enabled: bool = True
    initial_gamma_deg: float = 6.0
    trust_decay: float = 0.1
    penalty_gain: float = 0.5
    trust_threshold: float = 0.5
    eve_agreement_threshold: float = 0.4
    pla_cost_ratio: float = 0.001
    detector: DetectorConfig = DetectorConfig()
    fusion_weights: dict = field(
        default_factory=lambda: {"consistency": 1.0, "spatio_temporal": 1.0, "context": 1.0}
    )


@dataclass
class EventLog:
    header: dict
    events: list[dict]
    summary: dict

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, sort_keys=True, separators=(",", ":"))]
        lines += [json.dumps(e, sort_keys=True, separators=(",", ":")) for e in self.events]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def run_e2e(
    cfg: ScenarioConfig,
    attacks: list[AttackSpec],
    policy: PolicyConfig,
    rng: np.random.Generator,
    seed_note: int | None = None,
) -> EventLog:
    """Closed loop over one trace: authenticate, detect, classify, adapt.

    Adaptation outcomes apply from the next step on.  Final acceptance of a
    request requires the angle pre-check, the heavy check and node trust at
    or above the active threshold.  With adaptation disabled the knobs stay
    fixed, which gives the paired baseline for closed-loop comparisons.
    """
    trace = generate_trace(cfg, rng)
    for spec in attacks:
        trace = inject_attack(trace, spec, rng)

    knobs = SimKnobs(pla_gamma_deg=policy.initial_gamma_deg, trust_threshold=policy.trust_threshold)
    engine = AnomalyEngine(cfg.roadmap, cfg.sensor_position, policy.detector)
    cost_model = CostModel(pla_cost_ratio=policy.pla_cost_ratio)
    trust = {v.vehicle_id: TrustState(v.vehicle_id) for v in cfg.vehicles}

    events: list[dict] = []
    illegit_attempts = 0
    illegit_accepted = 0
    flag_steps = 0
    total_flags = 0
    total_actions = 0

    for step in trace.steps:
        reports_by_id = {r.reporter_id: r for r in step.reports}
        outcomes: dict[str, AuthOutcome] = {}
        for v in cfg.vehicles:
            node = v.vehicle_id
            m = next((mm for mm in step.measurements if mm.source_id == node), None)
            rep = reports_by_id.get(node)
            if m is None or rep is None:
                continue
            expected = _bearing_deg(rep.position, cfg.sensor_position)
            pla = abs(m.aoa_deg - expected) <= knobs.pla_gamma_deg
            run_hla = pla or node in knobs.hla_bypass_nodes
            hla_ok = bool(step.credentials_valid.get(node, True)) if run_hla else False
            cost = cost_model.pla_cost_ratio + (cost_model.hla_cost if run_hla else 0.0)
            outcome = AuthOutcome(pla_passed=pla, hla_run=run_hla, hla_passed=hla_ok, cost=cost)
            outcomes[node] = outcome
            accepted = outcome.accepted and trust[node].trust >= knobs.trust_threshold
            if node in step.illegitimate:
                illegit_attempts += 1
                illegit_accepted += int(accepted)
            events.append(
                {
                    "t": step.t,
                    "kind": "auth",
                    "node": node,
                    "pla": pla,
                    "hla_run": run_hla,
                    "hla_ok": hla_ok,
                    "accepted": accepted,
                    "cost": round(cost, 6),
                }
            )

        flags = engine.observe_step(step.measurements, step.reports)
        total_flags += len(flags)
        flag_steps += int(bool(flags))
        for f in flags:
            events.append(
                {
                    "t": step.t,
                    "kind": "flag",
                    "node": f.source_id,
                    "detector": f.detector,
                    "severity": round(f.severity, 6),
                    "explanation": f.explanation,
                }
            )

        nodes = sorted({f.source_id for f in flags} | set(outcomes))
        step_actions: list[tuple[AdaptationAction, str]] = []
        for node in nodes:
            node_flags = [f for f in flags if f.source_id == node]
            fused = fuse_flags(node_flags, policy.fusion_weights) if node_flags else 0.0
            if node in trust:
                trust[node] = trust_update(trust[node], fused, policy.trust_decay, policy.penalty_gain)
                events.append({"t": step.t, "kind": "trust", "node": node, "trust": round(trust[node].trust, 6)})
            if policy.adapt_enabled:
                risks = classify_risk(
                    node_flags,
                    [outcomes[node]] if node in outcomes else [],
                    KeygenHealth(eve_agreement=step.keygen_eve_agreement),
                    policy.eve_agreement_threshold,
                )
                state = trust.get(node, TrustState(node))
                risk_note = "+".join(sorted(r.value for r in risks))
                step_actions.extend((a, risk_note) for a in select_actions(risks, state, knobs.trust_threshold))
        if policy.adapt_enabled and step_actions:
            knobs = apply_actions([a for a, _ in step_actions], knobs)
            total_actions += len(step_actions)
            for a, risk_note in step_actions:
                events.append(
                    {
                        "t": step.t,
                        "kind": "action",
                        "target": a.target,
                        "action": a.kind.value,
                        "magnitude": a.magnitude,
                        "risks": risk_note,
                        "gamma_deg": knobs.pla_gamma_deg,
                    }
                )

    num_steps = len(trace.steps)
    summary = {
        "steps": num_steps,
        "illegitimate_attempts": illegit_attempts,
        "illegitimate_accepted": illegit_accepted,
        "illegitimate_acceptance_rate": (illegit_accepted / illegit_attempts) if illegit_attempts else 0.0,
        "flag_step_rate": flag_steps / num_steps,
        "total_flags": total_flags,
        "total_actions": total_actions,
        "final_gamma_deg": knobs.pla_gamma_deg,
    }
    header = {
        "schema": EVENT_LOG_SCHEMA,
        "seed": seed_note,
        "adapt": policy.adapt_enabled,
        "attacks": [a.kind.value for a in attacks],
    }
    return EventLog(header=header, events=events, summary=summary)


def straight_road_map() -> RoadMap:
    """One eastbound strip of road with a 20 m/s limit."""
    return RoadMap(
        polygons=((( -200.0, -3.5), (200.0, -3.5), (200.0, 3.5), (-200.0, 3.5)),),
        lane_headings_deg=(0.0,),
        speed_limit_mps=20.0,
    )


def intersection_config(
    duration_s: float = 5.0,
    step_s: float = 0.1,
    snr_db: float = 20.0,
) -> ScenarioConfig:
    """Two eastbound vehicles passing a roadside sensor south of the road."""
    return ScenarioConfig(
        duration_s=duration_s,
        step_s=step_s,
        roadmap=straight_road_map(),
        vehicles=(
            VehicleSpec("veh-a", (-40.0, -1.5), 12.0, 0),
            VehicleSpec("veh-b", (-45.0, 1.5), 9.0, 0),
        ),
        sensor_position=(0.0, -40.0),
        snr_db=snr_db,
    )


def preset_attack(kind: AttackKind, start_s: float = 2.0, end_s: float = 3.5, **params) -> AttackSpec:
    return AttackSpec(kind=kind, start_s=start_s, end_s=end_s, params=params)


def event_log_digest(log: EventLog) -> str:
    return hashlib.sha256(log.to_jsonl().encode()).hexdigest()
