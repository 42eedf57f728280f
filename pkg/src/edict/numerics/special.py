"""
special.py

Special functions used by the evidential losses.

Thin, validated wrappers over scipy.special. The NLL needs log-gamma for its
Gamma-ratio term and the Inverse-Gamma KL needs digamma; both reject
non-positive arguments instead of returning inf/nan silently.
"""

from __future__ import annotations

from typing import Union

import numpy as np
from scipy import special as sp

Real = Union[float, np.ndarray]


def _check_positive(x: Real, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} requires x > 0, got {x!r}")
    return arr


def lgamma(x: Real) -> Real:
    """Natural log of the gamma function for x > 0."""
    arr = _check_positive(x, "lgamma")
    out = sp.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def digamma(x: Real) -> Real:
    """psi(x) = d/dx lgamma(x) for x > 0."""
    arr = _check_positive(x, "digamma")
    out = sp.digamma(arr)
    return float(out) if out.ndim == 0 else out


def trigamma(x: Real) -> Real:
    arr = _check_positive(x, "trigamma")
    out = sp.polygamma(1, arr)
    return float(out) if out.ndim == 0 else out
