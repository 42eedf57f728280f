"""
params.py

Named parameter containers shared by the EDICT model and the classifier head.
"""

from __future__ import annotations

import hashlib
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from edict.numerics.autograd import Array

ShapeSpec = Dict[str, Tuple[Tuple[int, ...], int]]


def init_uniform(shapes: ShapeSpec, seed: int) -> Dict[str, np.ndarray]:
    """Uniform in +-(fan_in)^-1/2, drawn in declaration order from one seeded stream."""
    rng = np.random.default_rng(seed)
    out: Dict[str, np.ndarray] = {}
    for name, (shape, fan_in) in shapes.items():
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        out[name] = rng.uniform(-bound, bound, size=shape)
    return out


class ParameterSet:
    """An ordered mapping of parameter names to Arrays."""

    def __init__(self, params: Mapping[str, Array]):
        self._params: Dict[str, Array] = dict(params)

    def __getitem__(self, name: str) -> Array:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def parameters(self) -> Dict[str, Array]:
        return dict(self._params)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter names differ: missing={sorted(missing)}, unexpected={sorted(extra)}")
        for name, arr in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != arr.shape:
                raise ValueError(f"parameter {name}: shape {value.shape} != {arr.shape}")
            arr.data = value.copy()
            arr.zero_grad()

    def zero_grad(self) -> None:
        for arr in self._params.values():
            arr.zero_grad()

    def grads(self) -> Dict[str, np.ndarray]:
        return {k: (v.grad if v.grad is not None else np.zeros_like(v.data)) for k, v in self._params.items()}

    def _copy_params(self, requires_grad: bool) -> Dict[str, Array]:
        return {k: Array(v.data.copy(), requires_grad=requires_grad) for k, v in self._params.items()}

    @property
    def requires_grad(self) -> bool:
        return any(v.requires_grad for v in self._params.values())

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self._params):
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(self._params[name].data).tobytes())
        return h.hexdigest()
