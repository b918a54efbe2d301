from .steering import (
    NO_CERTIFICATE,
    STEERABLE,
    DualCertificate,
    LhsDecomposition,
    SteeringVerdict,
    StrategyTable,
    enumerate_strategies,
    lhs_feasibility,
    sdp_label,
    steering_weight,
    verify_certificate,
)
