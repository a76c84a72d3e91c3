"""Verification and simulation of audit policies for strategic classification."""

from auditgames.allocation import (
    ThresholdRule,
    TopKRule,
    allocate_threshold,
    allocate_topk,
    prob_in_top_k,
    rank_order,
)
from auditgames.audit import (
    SURE_LIE,
    SURE_TRUTH,
    SUSPICIOUS,
    RoundOutcome,
    TablePolicy,
    UniformKPolicy,
    UniformPolicy,
    classify_report,
    minimum_type,
    simulate_round,
    systematic_sample,
    uniform_k_policy,
    uniform_policy,
)
from auditgames.instance import InstanceSpec
from auditgames.oracle import (
    oracle_dsic_epsilon,
    oracle_epsilon,
    oracle_expected_gain,
    perturbation_optimality_check,
    skewed_policy,
)
from auditgames.scoring import (
    LinearScore,
    LogisticScore,
    PiecewiseLinearScore,
    TableScore,
    logistic_to_linear,
    score,
    score_extremes,
)
from auditgames.typespace import (
    AgentType,
    Box,
    FeatureDomain,
    LatticeMarginal,
    Prior,
    ScipyMarginal,
    TypeSpace,
    UniformMarginal,
    density,
    enumerate_types,
    interval_probability,
    sample_types,
)
from auditgames.verification import (
    EpsilonEstimate,
    epsilon_dsic_topk,
    epsilon_error_bound,
    epsilon_exact_threshold,
    epsilon_mc_threshold,
    epsilon_uniform_k,
    halfspace_box_probability,
    needs_audit,
    suspicious_probability,
)

__version__ = "0.1.0"

__all__ = [
    "InstanceSpec",
    "ThresholdRule",
    "TopKRule",
    "allocate_threshold",
    "allocate_topk",
    "prob_in_top_k",
    "rank_order",
    "SURE_LIE",
    "SURE_TRUTH",
    "SUSPICIOUS",
    "RoundOutcome",
    "TablePolicy",
    "UniformKPolicy",
    "UniformPolicy",
    "classify_report",
    "minimum_type",
    "simulate_round",
    "systematic_sample",
    "uniform_k_policy",
    "uniform_policy",
    "oracle_dsic_epsilon",
    "oracle_epsilon",
    "oracle_expected_gain",
    "perturbation_optimality_check",
    "skewed_policy",
    "LinearScore",
    "LogisticScore",
    "PiecewiseLinearScore",
    "TableScore",
    "logistic_to_linear",
    "score",
    "score_extremes",
    "AgentType",
    "Box",
    "FeatureDomain",
    "LatticeMarginal",
    "Prior",
    "ScipyMarginal",
    "TypeSpace",
    "UniformMarginal",
    "density",
    "enumerate_types",
    "interval_probability",
    "sample_types",
    "EpsilonEstimate",
    "epsilon_dsic_topk",
    "epsilon_error_bound",
    "epsilon_exact_threshold",
    "epsilon_mc_threshold",
    "epsilon_uniform_k",
    "halfspace_box_probability",
    "needs_audit",
    "suspicious_probability",
]
