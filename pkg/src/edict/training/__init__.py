from edict.training.checkpoint import Checkpoint, load_classifier, load_model, save_classifier, save_model
from edict.training.optim import AdamConfig, OptimizerState, adam_step, step_parameters
from edict.training.trainer import (
    ClassifierConfig,
    ClassifierResult,
    TrainConfig,
    TrainResult,
    batch_loss,
    final_states,
    predict_proba,
    train_classifier,
    train_edict,
)

__all__ = [
    "AdamConfig",
    "Checkpoint",
    "ClassifierConfig",
    "ClassifierResult",
    "OptimizerState",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "batch_loss",
    "final_states",
    "load_classifier",
    "load_model",
    "predict_proba",
    "save_classifier",
    "save_model",
    "step_parameters",
    "train_classifier",
    "train_edict",
]
