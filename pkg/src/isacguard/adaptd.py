"""Dynamic security adaptation.

Per-node trust updated from fused anomaly scores, a deterministic
classifier mapping detector evidence to risk classes, and a fixed policy
table mapping risks to mitigation actions applied to the running simulation
knobs.  Escalation never auto-relaxes within a run.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .authfusion import AuthOutcome
from .sentinel import CONSISTENCY, CONTEXT, SPATIO_TEMPORAL, AnomalyFlag


class RiskClass(enum.Enum):
    REMOTE_IMPERSONATION = "remote_impersonation"
    PERFORMANCE_DEGRADATION = "performance_degradation"
    PRIVACY_LEAKAGE = "privacy_leakage"
    PILOT_ATTACK = "pilot_attack"
    RIS_ATTACK = "ris_attack"
    AI_RELIANCE = "ai_reliance"
    UNPROTECTED_SENSING = "unprotected_sensing"
    CONTROL_PLANE_COMPROMISE = "control_plane_compromise"


class ActionKind(enum.Enum):
    TIGHTEN_PLA_GAMMA = "tighten_pla_gamma"
    FORCE_FULL_HLA = "force_full_hla"
    REKEY_SWITCH_OBSERVABLE = "rekey_switch_observable"
    SHARPEN_BEAM = "sharpen_beam"
    RAISE_TRUST_THRESHOLD = "raise_trust_threshold"
    REQUEST_CROSS_CHECK = "request_cross_check"


@dataclass(frozen=True)
class TrustState:
    node_id: str
    trust: float = 1.0
    last_update: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.trust <= 1.0:
            raise ValueError("trust lies in [0, 1]")


@dataclass(frozen=True)
class AdaptationAction:
    kind: ActionKind
    magnitude: float
    target: str


@dataclass(frozen=True)
class KeygenHealth:
    """Telemetry fed to the classifier by the key-generation subsystem."""

    eve_agreement: float = 0.0
    baseline: float = 0.125


@dataclass(frozen=True)
class SimKnobs:
    """The adaptable slice of the running simulation configuration."""

    pla_gamma_deg: float = 6.0
    hla_bypass_nodes: frozenset[str] = frozenset()
    toeplitz_epoch: int = 0
    feature_source: str = "aoa"
    codebook_beams: int = 32
    trust_threshold: float = 0.5


GAMMA_FLOOR_DEG = 0.5
BEAM_CAP = 128
TRUST_THRESHOLD_CAP = 0.95

# Risk -> mitigation table; iteration follows RiskClass declaration order.
ACTION_TABLE: dict[RiskClass, tuple[tuple[ActionKind, float], ...]] = {
    RiskClass.REMOTE_IMPERSONATION: ((ActionKind.FORCE_FULL_HLA, 1.0), (ActionKind.TIGHTEN_PLA_GAMMA, 0.5)),
    RiskClass.PERFORMANCE_DEGRADATION: ((ActionKind.REQUEST_CROSS_CHECK, 1.0),),
    RiskClass.PRIVACY_LEAKAGE: ((ActionKind.SHARPEN_BEAM, 2.0),),
    RiskClass.PILOT_ATTACK: ((ActionKind.REKEY_SWITCH_OBSERVABLE, 1.0),),
    RiskClass.RIS_ATTACK: ((ActionKind.SHARPEN_BEAM, 2.0), (ActionKind.REKEY_SWITCH_OBSERVABLE, 1.0)),
    RiskClass.AI_RELIANCE: ((ActionKind.RAISE_TRUST_THRESHOLD, 0.1),),
    RiskClass.UNPROTECTED_SENSING: ((ActionKind.RAISE_TRUST_THRESHOLD, 0.1),),
    RiskClass.CONTROL_PLANE_COMPROMISE: (
        (ActionKind.REKEY_SWITCH_OBSERVABLE, 1.0),
        (ActionKind.RAISE_TRUST_THRESHOLD, 0.1),
    ),
}


def trust_update(state: TrustState, anomaly_score: float, decay: float, penalty_gain: float) -> TrustState:
    """Exponential recovery toward full trust, proportional anomaly penalty.

    trust' = clamp(trust*(1-decay) + decay - penalty_gain*score, 0, 1).
    """
    if not 0.0 <= decay < 1.0:
        raise ValueError("decay lies in [0, 1)")
    if penalty_gain < 0.0:
        raise ValueError("penalty_gain must be >= 0")
    if not 0.0 <= anomaly_score <= 1.0:
        raise ValueError("anomaly_score lies in [0, 1]")
    new = state.trust * (1.0 - decay) + decay - penalty_gain * anomaly_score
    return replace(state, trust=min(1.0, max(0.0, new)), last_update=state.last_update + 1.0)


def clean_steps_to_recover(trust: float, decay: float, target: float = 0.9) -> int:
    """Smallest number of anomaly-free steps lifting trust above target."""
    if trust >= target:
        return 0
    import math

    return math.ceil(math.log((1.0 - target) / (1.0 - trust)) / math.log(1.0 - decay))


def classify_risk(
    flags: list[AnomalyFlag],
    auth_outcomes: list[AuthOutcome],
    keygen_stats: KeygenHealth | None = None,
    eve_agreement_threshold: float = 0.4,
) -> set[RiskClass]:
    """Deterministic evidence-to-risk rule table (per node).

    consistency together with a spatio-temporal flag or a failed heavy
    check reads as impersonation; an abrupt AoA discontinuity reads as RIS
    manipulation; elevated adversary key agreement reads as a pilot attack;
    context flags while credentials verify reads as control-plane trouble.
    """
    risks: set[RiskClass] = set()
    has = {det: any(f.detector == det for f in flags) for det in (CONSISTENCY, SPATIO_TEMPORAL, CONTEXT)}
    aoa_jump = any(f.detector == SPATIO_TEMPORAL and f.explanation.startswith("aoa_jump") for f in flags)
    hla_failed = any(o.hla_run and not o.hla_passed for o in auth_outcomes)
    hla_valid = any(o.hla_run and o.hla_passed for o in auth_outcomes)

    if has[CONSISTENCY] and (has[SPATIO_TEMPORAL] or hla_failed):
        risks.add(RiskClass.REMOTE_IMPERSONATION)
    if aoa_jump:
        risks.add(RiskClass.RIS_ATTACK)
    if keygen_stats is not None and keygen_stats.eve_agreement > eve_agreement_threshold:
        risks.add(RiskClass.PILOT_ATTACK)
    if has[CONTEXT] and hla_valid:
        risks.add(RiskClass.CONTROL_PLANE_COMPROMISE)
    return risks


def select_actions(
    risks: set[RiskClass],
    trust: TrustState,
    trust_threshold: float = 0.5,
) -> list[AdaptationAction]:
    """Fixed risk-to-action mapping, ordered by RiskClass declaration.

    Duplicate action kinds keep their first occurrence.  Any risk evaluated
    while the node's trust sits below the threshold additionally requests a
    cross-check from nearby sensors.
    """
    actions: list[AdaptationAction] = []
    seen: set[ActionKind] = set()

    def add(kind: ActionKind, magnitude: float):
        if kind not in seen:
            seen.add(kind)
            actions.append(AdaptationAction(kind, magnitude, trust.node_id))

    for risk in RiskClass:
        if risk in risks:
            for kind, mag in ACTION_TABLE[risk]:
                add(kind, mag)
    if risks and trust.trust < trust_threshold:
        add(ActionKind.REQUEST_CROSS_CHECK, 1.0)
    return actions


def apply_actions(actions: list[AdaptationAction], knobs: SimKnobs) -> SimKnobs:
    """Apply one step's action set to the simulation knobs.

    Application is idempotent per step: duplicate (kind, target) pairs
    collapse before applying, so the same set twice equals once.
    """
    unique: list[AdaptationAction] = []
    seen: set[tuple[ActionKind, str]] = set()
    for a in actions:
        if not isinstance(a.kind, ActionKind):
            raise ValueError(f"unknown action kind {a.kind!r}")
        key = (a.kind, a.target)
        if key not in seen:
            seen.add(key)
            unique.append(a)

    out = knobs
    for a in unique:
        if a.kind is ActionKind.TIGHTEN_PLA_GAMMA:
            out = replace(out, pla_gamma_deg=max(GAMMA_FLOOR_DEG, out.pla_gamma_deg * 0.5))
        elif a.kind is ActionKind.FORCE_FULL_HLA:
            out = replace(out, hla_bypass_nodes=out.hla_bypass_nodes | {a.target})
        elif a.kind is ActionKind.REKEY_SWITCH_OBSERVABLE:
            source = "aoa_alt" if out.feature_source == "aoa" else "aoa"
            out = replace(out, toeplitz_epoch=out.toeplitz_epoch + 1, feature_source=source)
        elif a.kind is ActionKind.SHARPEN_BEAM:
            out = replace(out, codebook_beams=min(BEAM_CAP, out.codebook_beams * 2))
        elif a.kind is ActionKind.RAISE_TRUST_THRESHOLD:
            out = replace(out, trust_threshold=min(TRUST_THRESHOLD_CAP, out.trust_threshold + a.magnitude))
        elif a.kind is ActionKind.REQUEST_CROSS_CHECK:
            pass  # logged by the caller; no knob changes
    return out
