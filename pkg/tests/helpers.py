from typing import Callable, Optional

import numpy as np

from edict.ingest.series import IrregularSeries
from edict.numerics.autograd import Array, Tape


def make_series(sid, times, values, masks=None, label: Optional[int] = None, static=None) -> IrregularSeries:
    values = np.asarray(values, dtype=np.float64)
    masks = np.ones(values.shape, dtype=bool) if masks is None else np.asarray(masks, dtype=bool)
    return IrregularSeries(sid, np.asarray(times, dtype=np.float64), values, masks, static=static, label=label)


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Numerical gradient of a scalar function by central differences."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up = x.copy()
        down = x.copy()
        up[idx] += eps
        down[idx] -= eps
        grad[idx] = (f(up) - f(down)) / (2.0 * eps)
    return grad


def tape_gradient(fn: Callable[[Array], Array], x: np.ndarray) -> np.ndarray:
    """Gradient of the scalar fn(x) from one recorded tape."""
    leaf = Array(x, requires_grad=True)
    with Tape() as tape:
        out = fn(leaf)
    tape.backward(out)
    return leaf.grad


def numeric_gradient(fn: Callable[[Array], Array], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    return central_difference(lambda v: fn(Array(v)).item(), x, eps)
