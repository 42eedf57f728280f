"""
classifier.py

Classifier head: a 2-layer network mapping h(T) to class logits, with a bottleneck of half
the hidden width.
"""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np
from scipy import special as sp

from edict.model.params import ParameterSet, ShapeSpec, init_uniform
from edict.numerics import autograd as ag
from edict.numerics.autograd import Array


def classifier_shapes(hidden: int, n_classes: int, width: int) -> ShapeSpec:
    return {
        "clf.w1": ((hidden, width), hidden),
        "clf.b1": ((1, width), hidden),
        "clf.w2": ((width, n_classes), width),
        "clf.b2": ((1, n_classes), width),
    }


class ClassifierHead(ParameterSet):
    def __init__(self, hidden: int, n_classes: int, params: Dict[str, Array]):
        if n_classes < 2:
            raise ValueError(f"a classifier needs at least 2 classes, got {n_classes}")
        self.hidden = hidden
        self.n_classes = n_classes
        self.width = params["clf.w1"].shape[1]
        expected = classifier_shapes(hidden, n_classes, self.width)
        for name, (shape, _) in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"parameter {name}: shape {params[name].shape} != {shape}")
        super().__init__({name: params[name] for name in expected})

    @classmethod
    def initialize(
        cls, hidden: int, n_classes: int, seed: int = 0, width: Optional[int] = None
    ) -> "ClassifierHead":
        width = width or max(hidden // 2, 1)
        values = init_uniform(classifier_shapes(hidden, n_classes, width), seed)
        return cls(hidden, n_classes, {k: Array(v, requires_grad=True) for k, v in values.items()})

    def frozen(self) -> "ClassifierHead":
        return ClassifierHead(self.hidden, self.n_classes, self._copy_params(requires_grad=False))

    def trainable(self) -> "ClassifierHead":
        return ClassifierHead(self.hidden, self.n_classes, self._copy_params(requires_grad=True))

    def logits(self, h) -> Array:
        hidden = ag.tanh(ag.as_array(h) @ self["clf.w1"] + self["clf.b1"])
        return hidden @ self["clf.w2"] + self["clf.b2"]

    def probabilities(self, h) -> np.ndarray:
        return sp.softmax(self.logits(h).data, axis=-1)


def cross_entropy(logits: Array, labels: np.ndarray) -> Array:
    """Mean softmax cross-entropy."""
    y = np.asarray(labels, dtype=np.int64)
    picked = logits[np.arange(y.shape[0]), y]
    return (ag.logsumexp(logits, axis=-1) - picked).mean()
