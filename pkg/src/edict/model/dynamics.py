"""
dynamics.py

Continuous-time hidden-state dynamics for irregular time series.

The hidden state h(t) is handled in three steps:
  1) propagate between observations with a GRU-ODE, integrated by explicit Euler
  2) update at an observation with a GRU cell fed by an observation encoding
  3) map h(t) to the NIW parameters through four small heads

Every function works on a batch of hidden-state rows. A batch of series walks
the union of its observation times, but each row is only propagated when it
has an event and always over its own inter-event gap, so a batched run gives
the same rows as running every series alone. A single series is the
batch-of-one case.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from edict.ingest.series import IrregularSeries
from edict.model.evidential import NIWParams
from edict.model.params import ParameterSet, ShapeSpec, init_uniform
from edict.numerics import autograd as ag
from edict.numerics.autograd import Array

logger = logging.getLogger(__name__)

EPS_LAMBDA = 1e-3
EPS_NU = 1e-3
HORIZON = 1.0
NIW_HEADS = ("mu", "lam", "psi", "nu")


@dataclass(frozen=True)
class ModelDims:
    """Architecture hyperparameters."""

    n_features: int
    hidden: int = 50
    encoder: int = 25
    head: int = 25
    n_static: int = 0
    ode_step: float = 0.01

    def __post_init__(self) -> None:
        for name in ("n_features", "hidden", "encoder", "head"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_static < 0:
            raise ValueError(f"n_static must be >= 0, got {self.n_static}")
        if not self.ode_step > 0:
            raise ValueError(f"ode_step must be positive, got {self.ode_step}")

    def to_dict(self) -> Dict[str, float]:
        return {
            "n_features": self.n_features,
            "hidden": self.hidden,
            "encoder": self.encoder,
            "head": self.head,
            "n_static": self.n_static,
            "ode_step": self.ode_step,
        }


def parameter_shapes(dims: ModelDims) -> ShapeSpec:
    """(shape, fan_in) of every parameter, in initialization order."""
    D, H, E, W, C = dims.n_features, dims.hidden, dims.encoder, dims.head, dims.n_static
    shapes: ShapeSpec = {}
    if C:
        shapes["init.w"] = ((C, H), C)
    shapes["init.b"] = ((1, H), max(C, 1))
    for gate in ("z", "r", "g"):
        shapes[f"ode.w{gate}"] = ((H, H), H)
        shapes[f"ode.b{gate}"] = ((1, H), H)
    for gate in ("u", "r", "c"):
        shapes[f"bayes.wx{gate}"] = ((E, H), E + H)
        shapes[f"bayes.wh{gate}"] = ((H, H), E + H)
        shapes[f"bayes.b{gate}"] = ((1, H), E + H)
    shapes["enc.w1"] = ((2 * D, E), 2 * D)
    shapes["enc.b1"] = ((1, E), 2 * D)
    shapes["enc.w2"] = ((E, E), E)
    shapes["enc.b2"] = ((1, E), E)
    for head, width in zip(NIW_HEADS, (D, 1, D, 1)):
        shapes[f"niw.{head}.w1"] = ((H, W), H)
        shapes[f"niw.{head}.b1"] = ((1, W), H)
        shapes[f"niw.{head}.w2"] = ((W, width), W)
        shapes[f"niw.{head}.b2"] = ((1, width), W)
    return shapes


class EdictModel(ParameterSet):
    """Parameters of the ODE field, the observation update, the encoder, the NIW heads and the h0 producer."""

    def __init__(self, dims: ModelDims, params: Dict[str, Array]):
        expected = parameter_shapes(dims)
        if set(params) != set(expected):
            raise ValueError(f"parameter names do not match dims {dims}")
        for name, (shape, _) in expected.items():
            if params[name].shape != shape:
                raise ValueError(f"parameter {name}: shape {params[name].shape} != {shape}")
        super().__init__({name: params[name] for name in expected})
        self.dims = dims

    @classmethod
    def initialize(cls, dims: ModelDims, seed: int = 0, requires_grad: bool = True) -> "EdictModel":
        values = init_uniform(parameter_shapes(dims), seed)
        return cls(dims, {k: Array(v, requires_grad=requires_grad) for k, v in values.items()})

    def frozen(self) -> "EdictModel":
        return EdictModel(self.dims, self._copy_params(requires_grad=False))

    def trainable(self) -> "EdictModel":
        return EdictModel(self.dims, self._copy_params(requires_grad=True))


@dataclass(frozen=True)
class HiddenState:
    """Hidden-state rows h (B, H) at normalized time t."""

    h: Array
    t: float = 0.0

    @property
    def batch(self) -> int:
        return self.h.shape[0]

    def rows(self, index) -> "HiddenState":
        return HiddenState(self.h[index], self.t)


@dataclass(frozen=True)
class TrajectoryEntry:
    time: float
    state_before: HiddenState
    niw_before: NIWParams
    state_after: HiddenState
    mask: np.ndarray


@dataclass
class Trajectory:
    entries: List[TrajectoryEntry] = field(default_factory=list)
    queries: List[Tuple[float, NIWParams]] = field(default_factory=list)
    final_state: Optional[HiddenState] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.entries], dtype=np.float64)


@dataclass(frozen=True)
class ObservationEvent:
    """One timeline point at which some batch rows observe data."""

    time: float
    rows: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    niw_before: NIWParams
    state_before: HiddenState
    state_after: HiddenState


# --- building blocks ---------------------------------------------------------

def _mlp(model: EdictModel, prefix: str, x: Array) -> Array:
    hidden = ag.tanh(x @ model[f"{prefix}.w1"] + model[f"{prefix}.b1"])
    return hidden @ model[f"{prefix}.w2"] + model[f"{prefix}.b2"]


def _static_matrix(model: EdictModel, static, batch: int) -> Optional[np.ndarray]:
    C = model.dims.n_static
    if static is None:
        if C:
            raise ValueError(f"model expects {C} static covariates, got none")
        return None
    s = np.atleast_2d(np.asarray(static, dtype=np.float64))
    if s.shape[-1] != C:
        raise ValueError(f"static covariate width {s.shape[-1]} does not match model width {C}")
    if C == 0:
        return None
    if s.shape[0] == 1 and batch > 1:
        s = np.repeat(s, batch, axis=0)
    if s.shape[0] != batch:
        raise ValueError(f"static covariates have {s.shape[0]} rows for a batch of {batch}")
    return s


def init_hidden(model: EdictModel, static_covariates=None, batch: int = 1) -> HiddenState:
    """h(0) = tanh(c W + b), or tanh(b) when the model has no static covariates."""
    s = _static_matrix(model, static_covariates, batch)
    if s is None:
        pre = ag.add(np.zeros((batch, 1)), model["init.b"])
    else:
        pre = Array(s) @ model["init.w"] + model["init.b"]
    return HiddenState(ag.tanh(pre), 0.0)


def substeps_for(model: EdictModel, dt: float) -> int:
    if dt <= 0:
        return 0
    return max(1, int(math.ceil(dt / model.dims.ode_step - 1e-9)))


def ode_propagate(model: EdictModel, state: HiddenState, dt: float, substeps: Optional[int] = None) -> HiddenState:
    """
    Euler-integrate dh/dt = (1 - z) * (g - h) over dt with `substeps` equal steps.

    z = sigmoid(h Wz + bz), r = sigmoid(h Wr + br), g = tanh((r * h) Wg + bg).
    The default step count keeps each step no longer than the model's ode_step.
    """
    if dt < 0:
        raise ValueError(f"cannot propagate over a negative duration {dt}")
    n = substeps_for(model, dt) if substeps is None else int(substeps)
    if dt == 0 or n == 0:
        return state
    steps = np.full(state.batch, dt / n)
    counts = np.full(state.batch, n, dtype=np.int64)
    return HiddenState(_euler(model, state.h, steps, counts), state.t + dt)


def _euler(model: EdictModel, h: Array, steps: np.ndarray, counts: np.ndarray) -> Array:
    """
    Lockstep Euler over batch rows: row r takes counts[r] steps of length
    steps[r]. Rows that have finished (or never start) are left bit-identical.
    """
    wz, bz = model["ode.wz"], model["ode.bz"]
    wr, br = model["ode.wr"], model["ode.br"]
    wg, bg = model["ode.wg"], model["ode.bg"]
    for i in range(int(counts.max(initial=0))):
        col = np.where(counts > i, steps, 0.0)[:, None]
        z = ag.sigmoid(h @ wz + bz)
        r = ag.sigmoid(h @ wr + br)
        g = ag.tanh((r * h) @ wg + bg)
        step = (1.0 - z) * (g - h) * col
        h = ag.select(col > 0.0, h + step, h)
    return h


def propagate_rows(model: EdictModel, h: Array, dts: np.ndarray) -> Array:
    """Propagate each row r over its own duration dts[r] with its own substep count."""
    dts = np.asarray(dts, dtype=np.float64).reshape(-1)
    if np.any(dts < 0):
        raise ValueError("cannot propagate over a negative duration")
    counts = np.array([substeps_for(model, float(dt)) for dt in dts], dtype=np.int64)
    steps = np.divide(dts, counts, out=np.zeros_like(dts), where=counts > 0)
    return _euler(model, h, steps, counts)


def encode_observation(model: EdictModel, values, mask) -> Array:
    """2-layer perceptron over [values * mask, mask]; masked-out values contribute zero."""
    m = np.atleast_2d(np.asarray(mask, dtype=bool))
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    D = model.dims.n_features
    if m.shape[-1] != D or v.shape != m.shape:
        raise ValueError(f"observation width mismatch: values {v.shape}, mask {m.shape}, D = {D}")
    inputs = np.concatenate([np.where(m, v, 0.0), m.astype(np.float64)], axis=-1)
    return _mlp(model, "enc", Array(inputs))


def bayes_update(model: EdictModel, state: HiddenState, encoding: Array) -> HiddenState:
    """GRU-cell jump h+ = (1 - u) * h- + u * c with the encoding as cell input."""
    x = ag.as_array(encoding)
    if x.ndim != 2 or x.shape[-1] != model.dims.encoder or x.shape[0] != state.batch:
        raise ValueError(f"encoding shape {x.shape} does not fit batch {state.batch} x E={model.dims.encoder}")
    h = state.h
    u = ag.sigmoid(x @ model["bayes.wxu"] + h @ model["bayes.whu"] + model["bayes.bu"])
    r = ag.sigmoid(x @ model["bayes.wxr"] + h @ model["bayes.whr"] + model["bayes.br"])
    c = ag.tanh(x @ model["bayes.wxc"] + (r * h) @ model["bayes.whc"] + model["bayes.bc"])
    return HiddenState((1.0 - u) * h + u * c, state.t)


def predict_niw(model: EdictModel, state: HiddenState) -> NIWParams:
    D = model.dims.n_features
    h = state.h
    mu0 = _mlp(model, "niw.mu", h)
    lam = ag.softplus(_mlp(model, "niw.lam", h)) + EPS_LAMBDA
    psi = ag.exp(_mlp(model, "niw.psi", h))
    nu = ag.softplus(_mlp(model, "niw.nu", h)) + (D + 1 + EPS_NU)
    return NIWParams(mu0=mu0, lam=lam, psi=psi, nu=nu)


# --- batched unrolling -------------------------------------------------------

Corrector = Callable[[float, np.ndarray, np.ndarray, np.ndarray, NIWParams], np.ndarray]


def _check_sorted(times: np.ndarray, what: str) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    if t.size and np.any(np.diff(t) < 0):
        raise ValueError(f"{what} must be sorted")
    if t.size and (t[0] < 0.0 or t[-1] > HORIZON):
        raise ValueError(f"{what} must lie in [0, {HORIZON}]")
    return t


def walk(
    model: EdictModel,
    batch: Sequence[IrregularSeries],
    *,
    query_times: Optional[Sequence[Sequence[float]]] = None,
    to_horizon: bool = False,
    correct: Optional[Corrector] = None,
    on_observation: Optional[Callable[[ObservationEvent], None]] = None,
    on_query: Optional[Callable[[float, np.ndarray, NIWParams], None]] = None,
) -> HiddenState:
    """
    Run a batch of series through propagate / update.

    A query at time t propagates a copy of the row from its latest update and
    never alters the main trajectory; it is answered before any update at t.
    `correct(t, rows, values, mask, niw_before)` may return replacement values
    for the observing rows before they are encoded.
    Returns the state after each row's last update, or every row at the horizon.
    """
    B = len(batch)
    if B == 0:
        raise ValueError("walk() needs at least one series")
    D = model.dims.n_features
    queries = [np.empty(0)] * B if query_times is None else [
        _check_sorted(q, "query times") for q in query_times
    ]
    if len(queries) != B:
        raise ValueError(f"got query times for {len(queries)} series, batch has {B}")

    obs_at: Dict[float, List[Tuple[int, int]]] = {}
    query_at: Dict[float, List[int]] = {}
    for row, s in enumerate(batch):
        if s.n_features != D:
            raise ValueError(f"series {s.id} has {s.n_features} features, model expects {D}")
        _check_sorted(s.times, f"series {s.id} times")
        for k, t in enumerate(s.times.tolist()):
            obs_at.setdefault(t, []).append((row, k))
        for t in queries[row].tolist():
            query_at.setdefault(t, []).append(row)

    statics = None
    if model.dims.n_static:
        missing = [s.id for s in batch if s.static is None]
        if missing:
            raise ValueError(f"model expects static covariates; series {missing[:3]} have none")
        statics = np.stack([s.static for s in batch])
    state = init_hidden(model, statics, batch=B)
    # rows advance independently; row_t[r] is the time row r was last propagated to
    row_t = np.zeros(B)

    for t in sorted(set(obs_at) | set(query_at)):
        q_rows = np.array(sorted(set(query_at.get(t, []))), dtype=np.int64)
        if q_rows.size and on_query is not None:
            h_q = propagate_rows(model, state.h[q_rows], t - row_t[q_rows])
            on_query(t, q_rows, predict_niw(model, HiddenState(h_q, t)))

        hits = obs_at.get(t)
        if not hits:
            continue
        rows = np.array([r for r, _ in hits], dtype=np.int64)
        dts = np.zeros(B)
        dts[rows] = t - row_t[rows]
        state = HiddenState(propagate_rows(model, state.h, dts), t)
        row_t[rows] = t

        values = np.stack([batch[r].values[k] for r, k in hits])
        mask = np.stack([batch[r].masks[k] for r, k in hits])
        before = state.rows(rows)
        niw_before = predict_niw(model, before)
        if correct is not None:
            values = np.asarray(correct(t, rows, values, mask, niw_before), dtype=np.float64)

        full_values = np.zeros((B, D))
        full_mask = np.zeros((B, D), dtype=bool)
        full_values[rows] = values
        full_mask[rows] = mask
        encoding = encode_observation(model, full_values, full_mask)
        updated = bayes_update(model, state, encoding)
        observing = np.zeros((B, 1), dtype=bool)
        observing[rows] = True
        state = HiddenState(ag.select(observing, updated.h, state.h), t)

        if on_observation is not None:
            on_observation(
                ObservationEvent(
                    time=t,
                    rows=rows,
                    values=values,
                    mask=mask,
                    niw_before=niw_before,
                    state_before=before,
                    state_after=state.rows(rows),
                )
            )

    if to_horizon:
        return HiddenState(propagate_rows(model, state.h, HORIZON - row_t), HORIZON)
    return HiddenState(state.h, float(row_t.max(initial=0.0)))


def unroll(
    model: EdictModel,
    series: IrregularSeries,
    query_times: Optional[Sequence[float]] = None,
    to_horizon: bool = False,
) -> Trajectory:
    """
    Propagate/update through one series, recording pre- and post-update states.

    NIW parameters are also emitted at every query time; a query answers from
    the state propagated since the latest update, without updating it.
    """
    traj = Trajectory()

    def _obs(event: ObservationEvent) -> None:
        traj.entries.append(
            TrajectoryEntry(
                time=event.time,
                state_before=event.state_before,
                niw_before=event.niw_before,
                state_after=event.state_after,
                mask=event.mask[0].copy(),
            )
        )

    def _query(t: float, rows: np.ndarray, niw: NIWParams) -> None:
        traj.queries.append((t, niw))

    queries = None if query_times is None else [query_times]
    traj.final_state = walk(
        model,
        [series],
        query_times=queries,
        to_horizon=to_horizon,
        on_observation=_obs,
        on_query=_query,
    )
    return traj
