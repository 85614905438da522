from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ParamStore


@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class MissingGradientError(RuntimeError):
    pass


def adam_step(store: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update in place; zeroes gradients afterwards."""
    missing = [name for name, t in store.items() if t.grad is None]
    if missing:
        raise MissingGradientError(f"no gradient for parameters: {missing}")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, t in store.items():
        g = t.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        t.data = t.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        t.grad = np.zeros_like(t.data)
