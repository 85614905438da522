"""Central finite differences over every parameter coordinate."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import NonFiniteError, ParamStore


def finite_diff_grad(
    f: Callable[[ParamStore], float], store: ParamStore, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = {}
    for name, t in store.items():
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)  # view: edits below write through
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            fp = float(f(store))
            flat[idx] = orig - eps
            fm = float(f(store))
            flat[idx] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NonFiniteError(f"non-finite objective at {name}[{idx}]")
            g.reshape(-1)[idx] = (fp - fm) / (2.0 * eps)
        out[name] = g
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Norm-wise relative error ||a - n|| / max(||a||, ||n||, floor)."""
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(num / den)


def max_relative_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]) -> float:
    return max(relative_error(analytic[k], numeric[k]) for k in numeric)
