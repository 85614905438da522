"""GRU cell built from recorded ops.

Convention (update-gate form)::

    z  = sigmoid(W_z m + U_z h + b_z)
    r  = sigmoid(W_r m + U_r h + b_r)
    h~ = tanh(W_h m + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * h~

``m`` and ``h`` may carry leading batch axes; the last axis is the feature axis.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from . import tensor as T

GRU_KEYS = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")


def init_gru(store: T.ParamStore, prefix: str, dim: int, rng: np.random.Generator) -> dict[str, T.Tensor]:
    """Register GRU parameters ``{prefix}.{key}``: matrices U(-1/sqrt(dim), 1/sqrt(dim)), zero biases."""
    s = 1.0 / np.sqrt(dim)
    out = {}
    for key in GRU_KEYS:
        if key.startswith("b"):
            value = np.zeros(dim)
        else:
            value = rng.uniform(-s, s, size=(dim, dim))
        out[key] = store.add(f"{prefix}.{key}", value)
    return out


def gru_params(store: T.ParamStore, prefix: str) -> dict[str, T.Tensor]:
    return {key: store[f"{prefix}.{key}"] for key in GRU_KEYS}


def gru_cell(params: Mapping[str, T.Tensor], m, h) -> T.Tensor:
    m = T.as_tensor(m)
    h = T.as_tensor(h)
    dim = params["wz"].shape[0]
    for key in GRU_KEYS:
        want = (dim,) if key.startswith("b") else (dim, dim)
        if params[key].shape != want:
            raise T.ShapeError(f"gru_cell: {key} has shape {params[key].shape}, expected {want}")
    if m.shape[-1] != dim or h.shape[-1] != dim:
        raise T.ShapeError(f"gru_cell: m {m.shape} / h {h.shape} incompatible with state size {dim}")

    z = T.sigmoid(T.add(T.add(T.linear(m, params["wz"]), T.linear(h, params["uz"])), params["bz"]))
    r = T.sigmoid(T.add(T.add(T.linear(m, params["wr"]), T.linear(h, params["ur"])), params["br"]))
    cand = T.tanh(
        T.add(T.add(T.linear(m, params["wh"]), T.linear(T.mul(r, h), params["uh"])), params["bh"])
    )
    return T.add(T.sub(h, T.mul(z, h)), T.mul(z, cand))
