from .adam import AdamState, MissingGradientError, adam_step
from .gradcheck import finite_diff_grad, max_relative_error, relative_error
from .gru import GRU_KEYS, gru_cell, gru_params, init_gru
from .tensor import (
    NonFiniteError,
    ParamStore,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    backward,
    record,
)

__all__ = [
    "AdamState",
    "MissingGradientError",
    "adam_step",
    "finite_diff_grad",
    "max_relative_error",
    "relative_error",
    "GRU_KEYS",
    "gru_cell",
    "gru_params",
    "init_gru",
    "NonFiniteError",
    "ParamStore",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "backward",
    "record",
]
