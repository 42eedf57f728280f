"""
optim.py

Adam with bias correction and global-norm gradient clipping.

adam_step is a pure function: it takes parameter and gradient mappings plus an
OptimizerState and returns new parameters and a new state, leaving its inputs
untouched. step_parameters applies it to a ParameterSet in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from edict.errors import ConfigError
from edict.model.params import ParameterSet


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 10.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", f"must be >= 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"adam_{name}", f"must lie in [0, 1), got {value}")
        if not self.eps > 0:
            raise ConfigError("adam_eps", f"must be positive, got {self.eps}")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm", f"must be positive, got {self.clip_norm}")


@dataclass(frozen=True)
class OptimizerState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "OptimizerState":
        return cls(
            m={k: np.zeros_like(np.asarray(p, dtype=np.float64)) for k, p in params.items()},
            v={k: np.zeros_like(np.asarray(p, dtype=np.float64)) for k, p in params.items()},
            step=0,
        )


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Dict[str, np.ndarray]:
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return {k: np.asarray(g, dtype=np.float64) for k, g in grads.items()}
    scale = max_norm / norm
    return {k: np.asarray(g, dtype=np.float64) * scale for k, g in grads.items()}


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    config: AdamConfig,
) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """One bias-corrected Adam update after clipping the gradients to config.clip_norm."""
    if set(params) != set(grads):
        raise ValueError(f"parameter and gradient names differ: {sorted(set(params) ^ set(grads))}")
    if not state.m:
        state = OptimizerState.zeros_like(params)
    for name, p in params.items():
        shape = np.shape(p)
        if np.shape(grads[name]) != shape or state.m[name].shape != shape:
            raise ValueError(
                f"shape mismatch for {name}: param {shape}, grad {np.shape(grads[name])}, moment {state.m[name].shape}"
            )

    clipped = clip_by_global_norm(grads, config.clip_norm)
    step = state.step + 1
    c1 = 1.0 - config.beta1 ** step
    c2 = 1.0 - config.beta2 ** step
    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = clipped[name]
        m = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        v = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        update = config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_params[name] = np.asarray(p, dtype=np.float64) - update
        new_m[name] = m
        new_v[name] = v
    return new_params, OptimizerState(m=new_m, v=new_v, step=step)


def step_parameters(pset: ParameterSet, state: OptimizerState, config: AdamConfig) -> OptimizerState:
    """Apply adam_step to a ParameterSet using its accumulated gradients; resets the gradients."""
    new_params, new_state = adam_step(pset.state_dict(), pset.grads(), state, config)
    for name, arr in pset.parameters().items():
        arr.data = new_params[name]
    pset.zero_grad()
    return new_state
