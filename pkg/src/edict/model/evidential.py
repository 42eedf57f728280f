"""
evidential.py

The Normal-Inverse-Wishart (NIW) evidential distribution and its loss terms.

Ψ is diagonal throughout, so every multivariate quantity factorizes per
feature dimension. All parameters are row-batched Arrays:

  mu0: (B, D)   prior mean
  lam: (B, 1)   mean-precision pseudo-count, > 0
  psi: (B, D)   diagonal of Ψ, > 0
  nu:  (B, 1)   degrees of freedom, > D + 1

Observations arrive as a value matrix x (B, D) plus a boolean mask (B, D).
Losses only look at observed dimensions and return one value per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special as sp

from edict.errors import PredictiveDegeneracyError
from edict.numerics import autograd as ag
from edict.numerics.autograd import Array

NLL_FORMS = ("boxed", "exact_t")

Scalar = Union[Array, float]


@dataclass(frozen=True)
class NIWParams:
    mu0: Array
    lam: Array
    psi: Array
    nu: Array

    @classmethod
    def from_values(cls, mu0, lam, psi, nu) -> "NIWParams":
        """Build constant parameters from plain numbers; 1-D vectors become one row."""
        mu0 = np.atleast_2d(np.asarray(mu0, dtype=np.float64))
        psi = np.atleast_2d(np.asarray(psi, dtype=np.float64))
        lam = np.asarray(lam, dtype=np.float64).reshape(-1, 1)
        nu = np.asarray(nu, dtype=np.float64).reshape(-1, 1)
        return cls(Array(mu0), Array(lam), Array(psi), Array(nu))

    @property
    def n_features(self) -> int:
        return self.mu0.shape[-1]

    @property
    def n_rows(self) -> int:
        return self.mu0.shape[0]

    def rows(self, index) -> "NIWParams":
        return NIWParams(self.mu0[index], self.lam[index], self.psi[index], self.nu[index])

    def detach(self) -> "NIWParams":
        return NIWParams(self.mu0.detach(), self.lam.detach(), self.psi.detach(), self.nu.detach())

    def validate(self) -> None:
        d = self.n_features
        if np.any(self.lam.data <= 0):
            raise ValueError("NIW requires lambda > 0")
        if np.any(self.psi.data <= 0):
            raise ValueError("NIW requires every psi_d > 0")
        if np.any(self.nu.data <= d + 1):
            raise ValueError(f"NIW requires nu > D + 1 = {d + 1}")


@dataclass(frozen=True)
class PredictiveT:
    """Marginal Student-t per dimension: loc, squared scale, degrees of freedom."""

    loc: Array
    scale_diag: Array
    dof: Array


@dataclass(frozen=True)
class UncertaintyDecomposition:
    prediction: Array
    aleatoric: Array
    epistemic: Array


@dataclass(frozen=True)
class LossBreakdown:
    nll: Scalar
    kl: Scalar
    reg: Scalar
    total: Scalar
    beta1: float
    beta2: float

    def as_floats(self) -> dict:
        def f(v: Scalar) -> float:
            return v.item() if isinstance(v, Array) else float(v)

        return {
            "nll": f(self.nll),
            "kl": f(self.kl),
            "reg": f(self.reg),
            "total": f(self.total),
            "beta1": self.beta1,
            "beta2": self.beta2,
        }


def _mask_inputs(x, mask, d: int) -> Tuple[np.ndarray, np.ndarray]:
    m = np.atleast_2d(np.asarray(mask, dtype=bool))
    if m.shape[-1] != d:
        raise ValueError(f"mask width {m.shape[-1]} does not match D = {d}")
    xv = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if xv.shape != m.shape:
        raise ValueError(f"values shape {xv.shape} does not match mask shape {m.shape}")
    # masked-out cells never reach the arithmetic
    return np.where(m, xv, 0.0), m


def _require_observed(m: np.ndarray, op: str) -> np.ndarray:
    counts = m.sum(axis=-1, keepdims=True).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError(f"{op} needs at least one observed dimension per row")
    return counts


def predictive_t(niw: NIWParams) -> PredictiveT:
    """Posterior predictive t: loc = mu0, dof = nu - D + 1, scale = (1+lam)/(lam*dof) * psi."""
    d = niw.n_features
    dof = niw.nu - (d - 1)
    if np.any(dof.data <= 0):
        raise PredictiveDegeneracyError("predictive dof must be positive")
    scale = (1.0 + niw.lam) / (niw.lam * dof) * niw.psi
    return PredictiveT(loc=niw.mu0, scale_diag=scale, dof=dof)


def uncertainty(niw: NIWParams) -> UncertaintyDecomposition:
    """Prediction E[mu] = mu0, aleatoric E[Sigma] = psi/(nu-D-1), epistemic var[mu] = aleatoric/lam."""
    d = niw.n_features
    if np.any(niw.nu.data <= d + 1):
        raise ValueError(f"uncertainty requires nu > D + 1 = {d + 1}")
    aleatoric = niw.psi / (niw.nu - (d + 1))
    epistemic = aleatoric / niw.lam
    return UncertaintyDecomposition(prediction=niw.mu0, aleatoric=aleatoric, epistemic=epistemic)


def predictive_variance(pred: PredictiveT) -> np.ndarray:
    """Per-dimension variance scale * dof / (dof - 2); needs dof > 2."""
    dof = pred.dof.data
    if np.any(dof <= 2):
        raise PredictiveDegeneracyError("predictive variance needs dof > 2")
    return pred.scale_diag.data * dof / (dof - 2.0)


def nll(niw: NIWParams, x, mask, form: str = "boxed") -> Array:
    """
    Negative log likelihood of observed dimensions, one value per row.

    form="boxed" evaluates the closed form with D replaced by the number of
    observed dimensions; form="exact_t" is the log-density of the marginal
    Student-t over the observed dimensions.
    """
    if form not in NLL_FORMS:
        raise ValueError(f"unknown nll form {form!r}; expected one of {NLL_FORMS}")
    xv, m = _mask_inputs(x, mask, niw.n_features)
    d_obs = _require_observed(m, "nll")
    w = m.astype(np.float64)
    diff = niw.mu0 - xv

    if form == "boxed":
        gamma_ratio = ag.lgamma((niw.nu + 1.0) * 0.5) - ag.lgamma((niw.nu - d_obs + 1.0) * 0.5)
        log_pi_nu = (np.log(np.pi) - ag.log(niw.nu)) * (0.5 * d_obs)
        log_det = (ag.log(niw.psi) * w).sum(axis=-1, keepdims=True) * 0.5
        quad = (diff * diff / niw.psi * w).sum(axis=-1, keepdims=True)
        tail = (niw.nu + 1.0) * 0.5 * ag.log(1.0 + niw.lam * quad)
        out = -gamma_ratio + log_pi_nu + log_det + tail
    else:
        pred = predictive_t(niw)
        dof = pred.dof
        half = (dof + d_obs) * 0.5
        norm = ag.lgamma(dof * 0.5) - ag.lgamma(half) + ag.log(dof * np.pi) * (0.5 * d_obs)
        log_det = (ag.log(pred.scale_diag) * w).sum(axis=-1, keepdims=True) * 0.5
        quad = (diff * diff / pred.scale_diag * w).sum(axis=-1, keepdims=True)
        out = norm + log_det + half * ag.log(1.0 + quad / dof)
    return ag.reshape(out, (out.shape[0],))


def conjugate_update(niw: NIWParams, x, mask) -> NIWParams:
    """
    One-observation NIW conjugate posterior, applied per observed dimension.

    The result is a constant (gradient-free) target.
    """
    xv, m = _mask_inputs(x, mask, niw.n_features)
    mu0, lam, psi, nu = niw.mu0.data, niw.lam.data, niw.psi.data, niw.nu.data
    innovation = xv - mu0
    mu_post = np.where(m, (lam * mu0 + xv) / (lam + 1.0), mu0)
    psi_post = np.where(m, psi + (lam / (lam + 1.0)) * innovation ** 2, psi)
    return NIWParams(Array(mu_post), Array(lam + 1.0), Array(psi_post), Array(nu + 1.0))


def niw_kl(p: NIWParams, q: NIWParams, mask) -> Array:
    """
    KL(p || q) summed over observed dimensions, one value per row.

    Dimension d of each NIW is read as a scalar NIW whose variance prior is
    InvGamma(a = nu/2, b = psi_d/2); the KL splits into the Inverse-Gamma KL
    plus the expected Gaussian KL of the mean.
    """
    if p.n_features != q.n_features:
        raise ValueError(f"niw_kl dimension mismatch: {p.n_features} vs {q.n_features}")
    m = np.atleast_2d(np.asarray(mask, dtype=bool))
    _require_observed(m, "niw_kl")
    w = m.astype(np.float64)

    a_p, a_q = p.nu * 0.5, q.nu * 0.5
    b_p, b_q = p.psi * 0.5, q.psi * 0.5
    inv_gamma = (
        (a_p - a_q) * ag.digamma(a_p)
        - ag.lgamma(a_p)
        + ag.lgamma(a_q)
        + a_q * (ag.log(b_p) - ag.log(b_q))
        + a_p * (b_q - b_p) / b_p
    )
    ratio = q.lam / p.lam
    gap = p.mu0 - q.mu0
    gaussian = (ratio - 1.0 - ag.log(ratio) + q.lam * gap * gap * a_p / b_p) * 0.5
    return ((inv_gamma + gaussian) * w).sum(axis=-1)


def evidential_reg(niw: NIWParams, x, mask) -> Array:
    """L1 error over observed dimensions scaled by the total evidence (lam + nu)."""
    xv, m = _mask_inputs(x, mask, niw.n_features)
    _require_observed(m, "evidential_reg")
    l1 = (ag.abs_(niw.mu0 - xv) * m.astype(np.float64)).sum(axis=-1, keepdims=True)
    out = l1 * (niw.lam + niw.nu)
    return ag.reshape(out, (out.shape[0],))


def total_loss(nll_value: Scalar, kl: Scalar, reg: Scalar, beta1: float, beta2: float) -> LossBreakdown:
    if beta1 < 0 or beta2 < 0:
        raise ValueError(f"loss weights must be non-negative, got beta1={beta1}, beta2={beta2}")
    total = nll_value + kl * beta1 + reg * beta2
    return LossBreakdown(nll=nll_value, kl=kl, reg=reg, total=total, beta1=beta1, beta2=beta2)


def t_interval(pred: PredictiveT, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-dimension central 1 - 2*alpha interval of the marginal Student-t."""
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 0.5], got {alpha}")
    loc = pred.loc.data
    if alpha == 0.5:
        return loc.copy(), loc.copy()
    q = sp.stdtrit(np.broadcast_to(pred.dof.data, loc.shape), 1.0 - alpha)
    half = q * np.sqrt(pred.scale_diag.data)
    return loc - half, loc + half
