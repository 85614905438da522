"""Comparison models: an independent pair classifier, a residual GCN and a GGNN.

All three read out a relation with the same two-layer network on the
concatenated endpoint states ``[h_i || h_j]`` followed by a softmax over the K
classes, and are trained with (class-weighted) softmax cross-entropy. GCN and
GGNN run on the fully connected graph over the real nodes of a scene.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import tensor as T
from .core.gru import gru_cell, gru_params, init_gru
from .data import Batch, as_batch
from .model import RelationPrediction, one_hot_targets, pair_weights, split_predictions

KINDS = ("pair", "gcn", "ggnn")


@dataclass(frozen=True)
class BaselineConfig:
    F: int
    K: int
    hidden: int | None = None  # readout width, default 2F
    layers: int = 2  # GCN depth
    T: int = 1  # GGNN steps

    def __post_init__(self):
        if self.F < 1 or self.K < 1 or self.layers < 1 or self.T < 0:
            raise ValueError(f"invalid baseline config {self}")
        if self.hidden is None:
            object.__setattr__(self, "hidden", 2 * self.F)
        if self.hidden < 1:
            raise ValueError("hidden width must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _uniform(rng, fan_in, shape):
    s = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def _init_readout(store: T.ParamStore, rng, F: int, hidden: int, K: int) -> None:
    store.add("mlp.w1", _uniform(rng, 2 * F, (hidden, 2 * F)))
    store.add("mlp.b1", np.zeros(hidden))
    store.add("mlp.w2", _uniform(rng, hidden, (K, hidden)))
    store.add("mlp.b2", np.zeros(K))


def init_pair_params(config: BaselineConfig, seed: int) -> T.ParamStore:
    rng = np.random.default_rng(seed)
    store = T.ParamStore()
    _init_readout(store, rng, config.F, config.hidden, config.K)
    return store


def init_gcn_params(config: BaselineConfig, seed: int) -> T.ParamStore:
    rng = np.random.default_rng(seed)
    store = T.ParamStore()
    for layer in range(config.layers):
        store.add(f"gcn.w{layer}", _uniform(rng, config.F, (config.F, config.F)))
    _init_readout(store, rng, config.F, config.hidden, config.K)
    return store


def init_ggnn_params(config: BaselineConfig, seed: int) -> T.ParamStore:
    rng = np.random.default_rng(seed)
    store = T.ParamStore()
    store.add("ggnn.w", _uniform(rng, config.F, (config.F, config.F)))
    init_gru(store, "gru", config.F, rng)
    _init_readout(store, rng, config.F, config.hidden, config.K)
    return store


def pair_logits(params: T.ParamStore, H) -> T.Tensor:
    """Two-layer readout on ``[h_i || h_j]`` for every ordered pair: (B, N, N, K) logits.

    The first layer is split into its h_i and h_j halves so the (B, N, N, 2F)
    concatenation never has to be materialised.
    """
    H = T.as_tensor(H)
    B, N, F = H.shape
    w1 = params["mlp.w1"]
    if w1.shape[1] != 2 * F:
        raise T.ShapeError(f"pair readout expects 2F={w1.shape[1]} inputs, states have F={F}")
    left = T.linear(H, T.slice_(w1, (slice(None), slice(0, F))))
    right = T.linear(H, T.slice_(w1, (slice(None), slice(F, 2 * F))))
    hidden = w1.shape[0]
    pre = T.add(T.reshape(left, (B, N, 1, hidden)), T.reshape(right, (B, 1, N, hidden)))
    z = T.relu(T.add(pre, params["mlp.b1"]))
    return T.add(T.linear(z, params["mlp.w2"]), params["mlp.b2"])


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_features(batch: Batch, F: int) -> None:
    if batch.features.shape[-1] != F:
        raise T.ShapeError(f"scene feature dimension {batch.features.shape[-1]} != model F={F}")


def normalized_adjacency(batch: Batch) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 for the fully connected graph on real nodes, (B, N, N).

    Rows and columns of empty nodes are zero.
    """
    m = batch.node_mask
    a_hat = (m[:, :, None] & m[:, None, :]).astype(np.float64)  # A + I
    deg = a_hat.sum(axis=-1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1.0)), 0.0)
    return inv_sqrt[:, :, None] * a_hat * inv_sqrt[:, None, :]


def neighbour_adjacency(batch: Batch) -> np.ndarray:
    return batch.valid_pairs.astype(np.float64)


def gcn_states(params: T.ParamStore, batch: Batch, layers: int) -> T.Tensor:
    a_hat = normalized_adjacency(batch)
    H = T.Tensor(batch.features)
    for layer in range(layers):
        H = T.add(T.relu(T.matmul(T.matmul(a_hat, H), params[f"gcn.w{layer}"])), H)
    return H


def ggnn_states(params: T.ParamStore, batch: Batch, steps: int) -> T.Tensor:
    adj = neighbour_adjacency(batch)
    keep = batch.node_mask[:, :, None].astype(np.float64)
    gru = gru_params(params, "gru")
    H = T.Tensor(batch.features)
    for _ in range(steps):
        m = T.matmul(adj, T.linear(H, params["ggnn.w"]))
        new = gru_cell(gru, m, H)
        H = T.add(T.mul(new, keep), T.mul(H, 1.0 - keep))
    return H


def xent_loss(logits, batch: Batch, class_weights=None) -> T.Tensor:
    """Class-weighted softmax cross-entropy, averaged like the GR2N loss."""
    logits = T.as_tensor(logits)
    w = pair_weights(batch, class_weights)
    per_pair = T.softmax_xent(logits, one_hot_targets(batch, logits.shape[-1]))
    return T.sum(T.mul(per_pair, w))


class _BaselineModel:
    kind = ""

    def __init__(self, config: BaselineConfig, seed: int = 0, params: T.ParamStore | None = None):
        self.config = config
        self.params = params if params is not None else self._init(config, seed)

    @property
    def num_classes(self) -> int:
        return self.config.K

    def _init(self, config, seed):
        raise NotImplementedError

    def states(self, batch: Batch) -> T.Tensor:
        raise NotImplementedError

    def scores(self, batch: Batch) -> T.Tensor:
        _check_features(batch, self.config.F)
        return pair_logits(self.params, self.states(batch))

    def probabilities(self, batch: Batch) -> np.ndarray:
        return softmax(self.scores(batch).data)

    def loss(self, scores, batch: Batch, class_weights=None) -> T.Tensor:
        return xent_loss(scores, batch, class_weights)

    def config_dict(self) -> dict:
        return self.config.to_dict()

    def predict_scene(self, scene) -> RelationPrediction:
        batch = as_batch(scene)
        return split_predictions(self.probabilities(batch), batch)[0]


class PairModel(_BaselineModel):
    """Each ordered pair classified from its own two feature vectors only."""

    kind = "pair"

    def _init(self, config, seed):
        return init_pair_params(config, seed)

    def states(self, batch: Batch) -> T.Tensor:
        return T.Tensor(batch.features)


class GcnModel(_BaselineModel):
    """``h <- ReLU(A_hat h W_l) + h`` per layer, then the pair readout."""

    kind = "gcn"

    def _init(self, config, seed):
        return init_gcn_params(config, seed)

    def states(self, batch: Batch) -> T.Tensor:
        return gcn_states(self.params, batch, self.config.layers)


class GgnnModel(_BaselineModel):
    """One shared message matrix (no relation types) and a GRU update per step."""

    kind = "ggnn"

    def _init(self, config, seed):
        return init_ggnn_params(config, seed)

    def states(self, batch: Batch) -> T.Tensor:
        return ggnn_states(self.params, batch, self.config.T)


def pair_baseline_forward(params: T.ParamStore, scene) -> RelationPrediction:
    batch = as_batch(scene)
    probs = softmax(pair_logits(params, T.Tensor(batch.features)).data)
    return split_predictions(probs, batch)[0]


def gcn_forward(params: T.ParamStore, scene, layers: int | None = None) -> RelationPrediction:
    if layers is None:
        layers = sum(1 for name in params if name.startswith("gcn.w"))
    batch = as_batch(scene)
    probs = softmax(pair_logits(params, gcn_states(params, batch, layers)).data)
    return split_predictions(probs, batch)[0]


def ggnn_forward(params: T.ParamStore, scene, steps: int = 1) -> RelationPrediction:
    batch = as_batch(scene)
    probs = softmax(pair_logits(params, ggnn_states(params, batch, steps)).data)
    return split_predictions(probs, batch)[0]
