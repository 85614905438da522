"""
Gradients on the tape, checked against finite differences
==========================================================

Every model in the package is built from recorded numpy ops. Here we
differentiate a small GRU-gated expression and then the full relation
network loss, and compare with central differences.
"""

import numpy as np

from gr2n.core import tensor as T
from gr2n.core.gradcheck import finite_diff_grad, max_relative_error
from gr2n.core.gru import gru_cell, gru_params, init_gru
from gr2n.data import Scene, as_batch
from gr2n.model import Gr2nConfig, Gr2nModel
from gr2n.training import gradient_check

rng = np.random.default_rng(0)

# a GRU cell with F=3, fed a random message and state
store = T.ParamStore()
init_gru(store, "gru", 3, rng)
m, h = rng.normal(size=3), rng.normal(size=3)


def objective(s):
    return T.sum(T.mul(gru_cell(gru_params(s, "gru"), m, h), np.array([1.0, -2.0, 0.5])))


# record the forward pass, then walk the tape backwards
with T.Tape() as tape:
    value = objective(store)
T.backward(tape, value, store)
analytic = {name: t.grad.copy() for name, t in store.items()}

numeric = finite_diff_grad(lambda s: objective(s).item(), store, eps=1e-5)
print("GRU objective", value.item())
print("max relative error vs finite differences", max_relative_error(analytic, numeric))

# the same check on the whole model: N=3 people, F=4, K=2 relation types
model = Gr2nModel(Gr2nConfig(F=4, K=2, T=1), seed=1)
scene = Scene("demo", rng.normal(size=(3, 4)), {(0, 1): 0, (1, 0): 0, (0, 2): 1, (2, 1): 1})
print("GR2N loss gradient check", gradient_check(model, as_batch(scene)))
