"""isacguard: deterministic multi-domain ISAC security simulator."""

__version__ = "0.1.0"

from .arraysig import (
    ArrayConfig,
    ChannelRealization,
    Codebook,
    PathSpec,
    PilotObservation,
    build_dft_codebook,
    estimate_aoa,
    estimate_aoa_batch,
    receive_pilot,
    sample_channel,
    steering_vector,
)
from .authfusion import (
    AuthOutcome,
    AuthRequest,
    ComplexityStats,
    CostModel,
    PlaConfig,
    TrafficMix,
    complexity_sweep,
    hla_verify,
    perfect_estimation_rho,
    pla_test,
    two_stage_auth,
)
from .keyforge import (
    AgreementPoint,
    Bits,
    KeyBundle,
    KeygenGeometry,
    QuantizerConfig,
    ReconciliationHelper,
    ToeplitzSeed,
    agreement_sweep,
    agreement_threshold,
    context_bind,
    key_agreement_trial,
    parity_encode,
    quantize_angle,
    reconcile,
    toeplitz_hash,
)
from .sentinel import (
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
from .adaptd import (
    ActionKind,
    AdaptationAction,
    RiskClass,
    SimKnobs,
    TrustState,
    apply_actions,
    classify_risk,
    select_actions,
    trust_update,
)
from .scenario import (
    AttackKind,
    AttackSpec,
    EventLog,
    PolicyConfig,
    ScenarioConfig,
    VehicleSpec,
    generate_trace,
    inject_attack,
    intersection_config,
    run_e2e,
)
