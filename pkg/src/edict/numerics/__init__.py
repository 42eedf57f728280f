from edict.numerics.autograd import (
    Array,
    Tape,
    abs_,
    active_tape,
    as_array,
    backward,
    concat,
    digamma,
    exp,
    lgamma,
    log,
    logsumexp,
    matmul,
    mean,
    power,
    reshape,
    select,
    sigmoid,
    softplus,
    sum_,
    take,
    tanh,
)

__all__ = [
    "Array",
    "Tape",
    "abs_",
    "active_tape",
    "as_array",
    "backward",
    "concat",
    "digamma",
    "exp",
    "lgamma",
    "log",
    "logsumexp",
    "matmul",
    "mean",
    "power",
    "reshape",
    "select",
    "sigmoid",
    "softplus",
    "sum_",
    "take",
    "tanh",
]
