from edict.model.classifier import ClassifierHead, cross_entropy
from edict.model.dynamics import (
    EdictModel,
    HiddenState,
    ModelDims,
    ObservationEvent,
    Trajectory,
    TrajectoryEntry,
    bayes_update,
    encode_observation,
    init_hidden,
    ode_propagate,
    propagate_rows,
    predict_niw,
    unroll,
    walk,
)
from edict.model.evidential import (
    LossBreakdown,
    NIWParams,
    PredictiveT,
    UncertaintyDecomposition,
    conjugate_update,
    evidential_reg,
    niw_kl,
    nll,
    predictive_t,
    predictive_variance,
    t_interval,
    total_loss,
    uncertainty,
)

__all__ = [
    "ClassifierHead",
    "EdictModel",
    "HiddenState",
    "LossBreakdown",
    "ModelDims",
    "NIWParams",
    "ObservationEvent",
    "PredictiveT",
    "Trajectory",
    "TrajectoryEntry",
    "UncertaintyDecomposition",
    "bayes_update",
    "conjugate_update",
    "cross_entropy",
    "encode_observation",
    "evidential_reg",
    "init_hidden",
    "niw_kl",
    "nll",
    "ode_propagate",
    "propagate_rows",
    "predict_niw",
    "predictive_t",
    "predictive_variance",
    "t_interval",
    "total_loss",
    "uncertainty",
    "unroll",
    "walk",
]
